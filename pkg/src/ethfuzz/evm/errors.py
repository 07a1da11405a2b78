class EvmError(Exception):
    """Base for faults raised by the in-memory chain."""


class UnknownAccount(EvmError):
    pass


class InsufficientBalance(EvmError):
    pass


class DeployRevert(EvmError):
    pass


class OutOfGas(EvmError):
    pass


class ConfigInvalid(ValueError):
    pass
