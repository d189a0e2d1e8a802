"""Strategy table: each hidden state described by its activity distribution."""

from __future__ import annotations

from dataclasses import dataclass

from .eventlog import Vocabulary
from .hmm import HmmModel


@dataclass(frozen=True)
class Strategy:
    id: int
    activities: tuple[tuple[str, float], ...]
    pi_value: float
    filtered_mass: float  # emission mass of activities below the display threshold

    @property
    def name(self) -> str:
        return f"S{self.id + 1}"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "pi": self.pi_value,
            "activities": [{"activity": a, "probability": p} for a, p in self.activities],
            "filtered_mass": self.filtered_mass,
        }


@dataclass(frozen=True)
class StrategyTable:
    strategies: tuple[Strategy, ...]
    display_threshold: float

    def __len__(self) -> int:
        return len(self.strategies)

    def __iter__(self):
        return iter(self.strategies)

    def to_dict(self) -> dict:
        return {
            "display_threshold": self.display_threshold,
            "strategies": [s.to_dict() for s in self.strategies],
        }

    def render(self) -> str:
        """Aligned text table with columns S, pi, Activities, Distribution."""
        rows = [("S", "pi", "Activities", "Distribution")]
        for s in self.strategies:
            rows.append(
                (
                    s.name,
                    f"{s.pi_value:.2f}",
                    ", ".join(a for a, _ in s.activities),
                    "[" + ", ".join(f"{p:.2f}" for _, p in s.activities) + "]",
                )
            )
        widths = [max(len(r[k]) for r in rows) for k in range(4)]
        lines = []
        for n, r in enumerate(rows):
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)


def extract_strategies(
    model: HmmModel, vocabulary: Vocabulary, display_threshold: float = 0.005
) -> StrategyTable:
    if len(vocabulary) != model.n_symbols:
        raise ValueError(
            f"vocabulary has {len(vocabulary)} labels but the model emits {model.n_symbols} symbols"
        )
    out = []
    for i in range(model.n_states):
        row = model.emit[i]
        kept = [
            (vocabulary.label_of(k), float(row[k]))
            for k in range(model.n_symbols)
            if row[k] >= display_threshold
        ]
        kept.sort(key=lambda kv: (-kv[1], kv[0]))
        out.append(
            Strategy(
                id=i,
                activities=tuple(kept),
                pi_value=float(model.pi[i]),
                filtered_mass=max(0.0, float(row.sum()) - sum(p for _, p in kept)),
            )
        )
    return StrategyTable(tuple(out), display_threshold)
