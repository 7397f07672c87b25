"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Parameter combination the library refuses to run with."""


class CellBudgetError(RuntimeError):
    """Active-cell enumeration would exceed the configured cell budget."""

    def __init__(self, candidate_count: int, budget: int):
        self.candidate_count = candidate_count
        self.budget = budget
        super().__init__(
            f"active-cell enumeration needs {candidate_count} cells, "
            f"exceeding the budget of {budget}"
        )
