"""claimcheck: verify numerical claims in text against relational data."""

__version__ = "0.1.0"
