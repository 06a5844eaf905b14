"""Pass/fail check records shared by the verification routines."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name:<40s} value={self.value:.6g} threshold={self.threshold:.3g} {self.detail}".rstrip()


@dataclass
class Report:
    title: str
    checks: list[Check] = field(default_factory=list)

    def add(self, name, value, threshold, passed, detail="") -> Check:
        check = Check(name, float(value), float(threshold), bool(passed), detail)
        self.checks.append(check)
        return check

    def at_most(self, name, value, threshold, detail=""):
        return self.add(name, value, threshold, value <= threshold, detail)

    def at_least(self, name, value, threshold, detail=""):
        return self.add(name, value, threshold, value >= threshold, detail)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def render(self) -> str:
        return "\n".join([f"== {self.title} ==", *(c.line() for c in self.checks)])

    def rows(self):
        return [(c.name, c.value, c.threshold, c.passed, c.detail) for c in self.checks]
