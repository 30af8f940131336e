import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "gateway_config(cfg): GatewayConfig for the gateway fixture")
