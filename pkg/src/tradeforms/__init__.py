"""tradeforms: power-sum demand/cost calculus, radical polynomial solving,
Laplace-log demand classification, heterogeneous-firm aggregation, and a
desk-scale world-trade equilibrium simulator with scale economies in
shipping and diseconomies of scale in production."""

__version__ = "0.1.0"
