import os


class Logger:
    """Line-oriented run log: one `[iter]\t[key]:value\t...` line per update.

    Every line is echoed to stdout and appended to `path`; a fresh logger
    (continue_=False) truncates the file once at construction.
    """

    def __init__(self, path, continue_=True, echo=True):
        self.path = path
        self.continue_ = continue_
        self.echo = echo
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(path, mode="a+" if continue_ else "w+"):
            pass

    def update(self, iter, **kwargs):
        out_line = f"[{str(iter).zfill(7)}]\t"
        for key in kwargs:
            out_line += f"[{key}]:{kwargs[key]}\t"
        out_line += "\n"
        if self.echo:
            print(out_line, end="")
        with open(self.path, mode="a") as f:
            f.write(out_line)
        return out_line

    def warn(self, iter, message):
        return self.update(iter, warning=message)
