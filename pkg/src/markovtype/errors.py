class InvariantViolation(AssertionError):
    """An asserted module invariant failed on a concrete instance.

    ``invariant`` names the invariant, ``instance`` describes where it failed.
    """

    def __init__(self, invariant: str, instance: str):
        self.invariant = invariant
        self.instance = instance
        super().__init__(f"{invariant}: {instance}")
