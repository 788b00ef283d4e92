import os


def dic_2_str(dics):
    out_str = "\n"
    for key in dics.keys():
        out_str += str(key) + ":" + str(dics[key]) + " "
    out_str += "\n"
    return out_str


def mkdirs(path):
    if not os.path.exists(path):
        os.makedirs(path)
    return path


def parse_int_list(text):
    """'16,32,64' or '2^4..2^10' -> [16, 32, 64] / [16, 32, ..., 1024]."""
    text = str(text).strip().strip("[]{}")
    if ".." in text:
        lo, hi = (part.strip() for part in text.split("..", 1))

        def power(t):
            base, _, exp = t.partition("^")
            return int(base), int(exp) if exp else None

        (b_lo, e_lo), (b_hi, e_hi) = power(lo), power(hi)
        if e_lo is None or e_hi is None or b_lo != b_hi:
            return list(range(int(lo), int(hi) + 1))
        return [b_lo ** e for e in range(e_lo, e_hi + 1)]
    return [int(float(tok)) for tok in text.replace(";", ",").split(",") if tok.strip()]
