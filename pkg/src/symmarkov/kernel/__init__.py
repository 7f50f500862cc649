from .expr import Num, Var, Neg, BinOp, Call, parse_kernel, to_sexpr, to_text, tokenize
from .spec import (BUILTINS, KernelSpec, Quadrature, SymmetryResult, check_symmetry, fiber_mass,
                   kernel_rectangle_mass, load_kernel, spec_from_dict)
