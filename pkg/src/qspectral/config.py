"""
Run configuration: a flat `key = value` file, overridden by command-line flags.
"""
import logging
import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional

from qspectral.consts import ALPHA, C_K, C_Q, C_T, METHODS_GRADIENT, METHODS_HESSIAN
from qspectral.exceptions import ConfigError

SUBCOMMANDS = ['gradient', 'hessian', 'sparse-hessian', 'verify-bounds', 'spectral-error-sweep', 'query-ledger']

ESTIMATION_SUBCOMMANDS = ['gradient', 'hessian', 'sparse-hessian']

DEFAULT_FUNCTION = {
    'spectral-error-sweep': 'geometric_d1',
    'query-ledger': 'poly_d2',
}


def _int_list(raw):
    return [int(v) for v in str(raw).replace(' ', '').split(',') if v != '']


def _bool(raw):
    if isinstance(raw, bool):
        return raw
    value = str(raw).strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {raw!r}')


def _optional(parse):
    def inner(raw):
        if raw is None or str(raw).strip().lower() in ('', 'none'):
            return None
        return parse(raw)
    return inner


def _opt(parse, default=None, **kwargs):
    return field(default=default, metadata={'parse': _optional(parse)}, **kwargs)


def _req(parse, default, **kwargs):
    return field(default=default, metadata={'parse': parse}, **kwargs)


def _list_field(default):
    return field(default_factory=lambda: list(default), metadata={'parse': _int_list})


@dataclass
class RunConfig:
    """
    Everything a CLI run needs. Field names are the keys accepted in config files; flags
    override file values.
    """
    subcommand: str = _req(str, 'gradient')
    function: Optional[str] = _opt(str)
    method: Optional[str] = _opt(str)
    epsilon: float = _req(float, 0.1)
    rho: float = _req(float, 0.1)
    M: Optional[float] = _opt(float)
    seeds: List[int] = _list_field([0])
    out: Optional[str] = _opt(str)
    jobs: int = _req(int, 1)
    # method overrides
    N: Optional[int] = _opt(int)
    m: Optional[int] = _opt(int)
    a: Optional[float] = _opt(float)
    q: Optional[int] = _opt(int)
    s: Optional[int] = _opt(int)
    m_total: Optional[int] = _opt(int)
    probe_count: Optional[int] = _opt(int)
    probe_repeats: Optional[int] = _opt(int)
    c_T: float = _req(float, C_T)
    c_q: float = _req(float, C_Q)
    c_k: float = _req(float, C_K)
    alpha: float = _req(float, ALPHA)
    cap: Optional[int] = _opt(int)
    log_base: Optional[float] = _opt(float)
    kappa_mode: str = _req(str, 'global')
    probe_mode: str = _req(str, 'plain')
    findiff_path: str = _req(str, 'probe')
    # bound sweeps
    m_min: int = _req(int, 1)
    m_max: int = _req(int, 8)
    k_extra: int = _req(int, 6)
    abs_sum_max: int = _req(int, 12)
    stencil_m_max: int = _req(int, 6)
    x_max: float = _req(float, 0.3)
    N_min: int = _req(int, 4)
    N_max: int = _req(int, 24)
    delta: float = _req(float, 1.0)
    r_tilde: float = _req(float, 2.0)
    sweep_x: float = _req(float, 1.0)
    samples: int = _req(int, 100_000)
    # query ledger
    dims: List[int] = _list_field([2, 3])
    sparse_dims: List[int] = _list_field([4, 8, 16])
    verbose: bool = _req(_bool, False)
    debug: bool = _req(_bool, False)

    @property
    def resolved_function(self):
        return self.function if self.function is not None else DEFAULT_FUNCTION.get(self.subcommand)

    @property
    def resolved_method(self):
        if self.method is not None:
            if self.subcommand == 'hessian' and self.method in METHODS_GRADIENT:
                return f'{self.method}-dense'
            if self.subcommand == 'sparse-hessian' and self.method in METHODS_GRADIENT:
                return f'{self.method}-sparse'
            return self.method
        if self.subcommand == 'gradient':
            return 'spectral'
        if self.subcommand == 'hessian':
            return 'spectral-dense'
        if self.subcommand == 'sparse-hessian':
            return 'spectral-sparse'
        return None

    def validate(self):
        """Raises ConfigError on the first invalid value."""
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f'unknown subcommand {self.subcommand}')
        if self.subcommand in ESTIMATION_SUBCOMMANDS and self.function is None:
            raise ConfigError(f'{self.subcommand} needs --function')
        method = self.resolved_method
        if self.subcommand == 'gradient' and method not in METHODS_GRADIENT:
            raise ConfigError(f'gradient method must be one of {METHODS_GRADIENT}, got {method}')
        if self.subcommand in ('hessian', 'sparse-hessian'):
            allowed = [x for x in METHODS_HESSIAN if x.endswith('sparse') == (self.subcommand == 'sparse-hessian')]
            if method not in allowed:
                raise ConfigError(f'{self.subcommand} method must be one of {allowed}, got {method}')
        if not self.epsilon > 0:
            raise ConfigError(f'epsilon must be positive, got {self.epsilon}')
        if not 0 < self.rho < 1:
            raise ConfigError(f'rho must lie in (0, 1), got {self.rho}')
        if not self.seeds:
            raise ConfigError('no seeds given')
        if self.jobs < 1:
            raise ConfigError(f'jobs must be at least 1, got {self.jobs}')
        for lo, hi in (('m_min', 'm_max'), ('N_min', 'N_max')):
            if getattr(self, lo) > getattr(self, hi) or getattr(self, lo) < 1:
                raise ConfigError(f'empty sweep range {lo}={getattr(self, lo)}, {hi}={getattr(self, hi)}')
        if self.k_extra < 0 or self.abs_sum_max < 1 or self.stencil_m_max < 1:
            raise ConfigError('sweep extents must be positive')
        if self.N_min < 2:
            raise ConfigError(f'N_min must be at least 2, got {self.N_min}')
        if not 0 < self.delta < self.r_tilde:
            raise ConfigError(f'need 0 < delta < r_tilde, got delta={self.delta}, r_tilde={self.r_tilde}')
        if self.kappa_mode not in ('global', 'measured'):
            raise ConfigError(f'kappa_mode must be global or measured, got {self.kappa_mode}')
        if self.probe_mode not in ('plain', 'scaled'):
            raise ConfigError(f'probe_mode must be plain or scaled, got {self.probe_mode}')
        if self.findiff_path not in ('probe', 'gevrey'):
            raise ConfigError(f'findiff_path must be probe or gevrey, got {self.findiff_path}')
        if not self.dims or not self.sparse_dims or min(self.dims + self.sparse_dims) < 1:
            raise ConfigError('dimension lists must be non-empty and positive')
        if self.samples < 1:
            raise ConfigError(f'samples must be positive, got {self.samples}')
        return self


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def coerce(key, raw):
    if key not in FIELDS:
        raise ConfigError(f'unknown config key {key!r}')
    try:
        return FIELDS[key].metadata['parse'](raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f'invalid value for {key}: {raw!r} ({err})')


def parse_config_text(text, source='<string>') -> dict:
    """Parses `key = value` lines; `#` starts a comment, blank lines are ignored."""
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f'{source}:{number}: expected key = value, got {line!r}')
        key, raw = (part.strip() for part in line.split('=', 1))
        values[key] = coerce(key, raw)
    logging.debug(f'config from {source}: {values}')
    return values


def load_config_file(path) -> dict:
    try:
        with open(path, encoding='utf-8') as f:
            text = f.read()
    except OSError as err:
        raise ConfigError(f'cannot read config file {path}: {err}')
    return parse_config_text(text, source=str(path))


def build_config(file_values=None, overrides=None) -> RunConfig:
    """File values first, then every override that is not None."""
    values = dict(file_values or {})
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    unknown = [k for k in values if k not in FIELDS]
    if unknown:
        raise ConfigError(f'unknown config keys {unknown}')
    return RunConfig(**values).validate()
