"""Graph-to-sequence generation from RDF triple sets."""

__version__ = "0.1.0"
