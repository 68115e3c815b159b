"""Account classification on Ethereum from account-centred static and dynamic transaction graphs."""

__version__ = "0.1.0"
