from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Check:
    name: str
    passed: bool
    residual: float = 0.0
    tol: float | None = None
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        tol = f" (tol {self.tol:.0e})" if self.tol is not None else ""
        detail = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name:<40s} max residual {self.residual:.3e}{tol}{detail}"


@dataclass
class Report:
    """Ordered collection of named pass/fail checks."""

    title: str = ""
    checks: list[Check] = field(default_factory=list)

    def add(self, name, passed, residual=0.0, tol=None, detail="") -> Check:
        c = Check(name, bool(passed), float(residual), tol, detail)
        self.checks.append(c)
        return c

    def check(self, name, residual, tol, detail="") -> Check:
        """Record ``residual < tol`` as a check (NaN fails)."""
        residual = float(residual)
        return self.add(name, residual < tol, residual, tol, detail)

    def extend(self, other: "Report", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.passed, c.residual, c.tol, c.detail))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __bool__(self):
        return self.passed

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def format(self) -> str:
        lines = [self.title] if self.title else []
        lines += [c.line() for c in self.checks]
        return "\n".join(lines)

    def __str__(self):
        return self.format()
