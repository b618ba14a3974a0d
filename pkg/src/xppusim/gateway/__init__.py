"""Operator gateway: wire protocol and the network boundary around a runtime."""
