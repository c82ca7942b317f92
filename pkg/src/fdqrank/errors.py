"""Exception hierarchy shared by the library and the CLI.

Each class carries the CLI exit code it maps to.
"""


class FdqError(Exception):
    exit_code = 1


class UsageError(FdqError, ValueError):
    exit_code = 1


class ParseError(FdqError, ValueError):
    exit_code = 1

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class LoadError(FdqError, ValueError):
    exit_code = 1


class ResourceError(FdqError, RuntimeError):
    exit_code = 2


class ComputationError(FdqError, RuntimeError):
    exit_code = 3
