# cosserat_dem/errors.py


class CosseratDEMError(Exception):
    """Base class for every error raised by the solver package."""


class ConfigError(CosseratDEMError):
    pass


class MeshError(CosseratDEMError):
    pass


class StencilError(CosseratDEMError):
    pass


class MaterialError(CosseratDEMError):
    pass


class AssemblyError(CosseratDEMError):
    pass


class SolverError(CosseratDEMError):
    pass


class ProbeError(CosseratDEMError):
    pass


class CaseError(CosseratDEMError):
    pass
