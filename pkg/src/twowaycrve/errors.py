"""Exception types raised across the package."""


class TwoWayError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(TwoWayError):
    pass


class NoConvergence(TwoWayError):
    pass


class MissingColumn(TwoWayError):
    pass


class ParseError(TwoWayError):
    def __init__(self, row, col, value=None):
        self.row = row
        self.col = col
        self.value = value
        msg = f"cannot parse column {col!r} at data row {row}"
        if value is not None:
            msg += f" (value {value!r})"
        super().__init__(msg)


class EmptyData(TwoWayError):
    pass


class RankDeficient(TwoWayError):
    pass


class SingularMjj(TwoWayError):
    def __init__(self, cluster):
        self.cluster = cluster
        super().__init__(f"M_jj block is singular for cluster {cluster!r}")


class TooFewClusters(TwoWayError):
    pass


class SingularReducedGram(TwoWayError):
    def __init__(self, cluster):
        self.cluster = cluster
        super().__init__(
            f"delete-one Gram is singular when cluster {cluster!r} is omitted; "
            "enable the generalized inverse"
        )


class CollinearColumn(TwoWayError):
    pass


class DegenerateSelector(TwoWayError):
    pass


class InfeasibleSizes(TwoWayError):
    pass


class InfeasibleThinning(TwoWayError):
    pass


class ConfigError(TwoWayError):
    def __init__(self, key, msg):
        self.key = key
        super().__init__(f"{key}: {msg}")
