"""
CamoFlow tensor core

Minimal dense-array engine with reverse-mode automatic differentiation:
- Tensor / Function tape (tensor.py)
- Differentiable primitives (functional.py)
- Module / Parameter containers (module.py)
- Adam with decoupled weight decay (optim.py)
- Finite-difference gradient checks (gradcheck.py)
"""

from camoflow.autograd.tensor import (
    Function,
    Tensor,
    default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
)
from camoflow.autograd.module import Conv2d, Linear, Module, ModuleList, Parameter
from camoflow.autograd.optim import Adam, AdamState, adam_step
from camoflow.autograd.gradcheck import check_parameters, grad_check, relative_error

__all__ = [
    'Function',
    'Tensor',
    'default_dtype',
    'is_grad_enabled',
    'no_grad',
    'precision',
    'Conv2d',
    'Linear',
    'Module',
    'ModuleList',
    'Parameter',
    'Adam',
    'AdamState',
    'adam_step',
    'check_parameters',
    'grad_check',
    'relative_error',
]
