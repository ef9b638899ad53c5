class DeblurError(Exception):
    """Base class for errors raised by deblurnet."""


class ShapeError(DeblurError, ValueError):
    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


class UnsupportedConfigError(DeblurError, ValueError):
    pass


class DegenerateStatisticsError(DeblurError, ValueError):
    pass


class NonFiniteGradientError(DeblurError, FloatingPointError):
    def __init__(self, iteration, layer):
        super().__init__(f"non-finite gradient at iteration {iteration} in {layer}")
        self.iteration = iteration
        self.layer = layer


class CheckpointError(DeblurError):
    pass


class DatasetError(DeblurError):
    pass
