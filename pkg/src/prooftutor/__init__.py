"""Knowledge-graph-grounded propositional-logic proof engine and tutoring pipeline."""

__version__ = "0.1.0"
