from enum import StrEnum

class GridMode(StrEnum):
    BAND = "band"
    CIRCULANT = "circulant"

class SpectrumFamily(StrEnum):
    SPARSE = "sparse"
    PIECEWISE_LINEAR = "piecewise_linear"
    QUANTUM_DOT = "quantum_dot"

class SequenceKind(StrEnum):
    RADEMACHER = "rademacher"
    FOURIER_ENSEMBLE = "fourier_ensemble"
    FOURIER_BASIS = "fourier_basis"
    CPMG = "cpmg"

class MethodName(StrEnum):
    CS_TGV = "CS_TGV"
    CS_R = "CS_R"
    CS_R_TGV = "CS_R+TGV"
    CPMG = "CPMG"

class FourierMode(StrEnum):
    ENSEMBLE = "ensemble"
    IDEAL = "ideal"

class SolverProgram(StrEnum):
    L1 = "l1"
    TGV = "tgv"
    L1_TGV = "l1_tgv"
    NNLS = "nnls"
    CURVATURE = "curvature"

class SweepKind(StrEnum):
    ACCURACY = "accuracy"
    KC_SCALING = "kc_scaling"
    QD_COMPARISON = "qd_comparison"
    PULSE_BUDGET = "pulse_budget"
    CURVATURE_VS_TGV = "curvature_vs_tgv"
