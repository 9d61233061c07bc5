"""Shared test models."""
from twofold.model import PolynomialField, PwsModel
from twofold.regularization import ALGEBRAIC, ARCTAN

REGS = [ARCTAN, ALGEBRAIC]


def case7_model(perturbed: bool = False) -> PwsModel:
    """Sliding field (2 + x)(1 - x^2)/2: simple zeros at both corners of [-1, 1]."""
    ux = {"0,0": 3.0, "1,0": 1.0, "2,0": -2.0, "3,0": -1.0}
    uy = {"1,0": 1.0}
    lx = {"0,0": -1.0}
    ly = {"1,0": -1.0}
    if perturbed:
        ux["0,1"], uy["0,1"], lx["0,1"], ly["0,1"] = 0.7, 0.5, 0.3, -0.2
    return PwsModel(PolynomialField(ux, uy), PolynomialField(lx, ly), name="case7")



def parabola_model(upper_x: dict, name: str = "parabola") -> PwsModel:
    """Upper field ``(X+, x)`` over the lower field ``(-1, -x)``; then ``det Z = x (X+ - 1)``."""
    return PwsModel(PolynomialField(upper_x, {"1,0": 1.0}), PolynomialField({"0,0": -1.0}, {"1,0": -1.0}), name=name)


# X+ - 1 chosen so that the zeros of det Z on [-1, 1] realize each configuration
CASE_MODELS = {
    "I": {"0,0": 2.0, "1,0": 0.5},  # no zeros on [-1, 1]
    "II": {"0,0": 1.5, "1,0": 2.0, "2,0": 2.0},  # 1 + 2 (x + 1/2)^2
    "III": {"0,0": 2.0, "1,0": 1.0},  # 1 + (1 + x)
    "IV": {"0,0": 2.0, "1,0": -1.0},  # 1 + (1 - x)
    "V": {"0,0": 1.5, "1,0": -1.5, "3,0": 2.0},  # 1 + 2 (1 + x)(x - 1/2)^2
    "V-mirror": {"0,0": 1.5, "1,0": 1.5, "3,0": -2.0},  # 1 + 2 (1 - x)(x + 1/2)^2
    "VI": {"0,0": 1.5, "1,0": -0.5, "2,0": -0.5, "3,0": 0.5},  # 1 + (1 + x)(1 - x)^2 / 2
    "VII": {"0,0": 2.0, "2,0": -1.0},  # 1 + (1 - x^2)
    "VIII": {"0,0": 1.5, "1,0": 2.0, "2,0": 1.5, "3,0": -2.0, "4,0": -2.0},  # 1 + 2 (1 - x^2)(x + 1/2)^2
    "excluded": {"0,0": 1.5, "1,0": 3.0, "2,0": 6.0, "3,0": 4.0},  # 1 + 4 (x + 1/2)^3
}
