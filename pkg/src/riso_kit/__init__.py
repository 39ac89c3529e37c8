"""riso-kit: exact computations with risometry invariants of singular sets.

Subpackages cover truncated Hahn-series arithmetic (valfield), ultrametric
ball geometry and one-dimensional risometry decisions (geometry), finite
presentations of definable sets (presentations), the riso-triviality
certificate engine (risotriv), shadow iteration and stratification
(stratify), and the motivic measure / Poincare series layer (motive).
A FastAPI service (service) exposes the operations; the CLI (cli) is a
thin client over the same request/response models.
"""

__version__ = "0.1.0"
