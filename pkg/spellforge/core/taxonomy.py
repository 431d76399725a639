"""Payment taxonomy: which codes are income support and to which subfamily they belong."""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Union

from spellforge.errors import ConfigError, UnknownPaymentCodeError


class Subfamily(str, Enum):
    """Payment subfamilies used by durations, ever-indicators and outcomes."""

    DISABILITY = "disability"
    CARER = "carer"
    AGE_PENSION = "age-pension"
    UNEMPLOYMENT = "unemployment"
    PARENTING = "parenting"
    PARTNER = "partner"
    CRISIS = "crisis"
    OTHER_IS = "other-IS"
    NON_IS = "non-IS"


@dataclass(frozen=True, slots=True)
class PaymentCategory:
    code: str
    is_income_support: bool
    subfamily: Subfamily


_IS_CODES: Dict[str, Subfamily] = {
    "Disability Support Pension": Subfamily.DISABILITY,
    "Carer Payment": Subfamily.CARER,
    "Age Pension": Subfamily.AGE_PENSION,
    "Newstart Mature Age Allowance": Subfamily.UNEMPLOYMENT,
    "Newstart Allowance": Subfamily.UNEMPLOYMENT,
    "Youth Allowance (Other)": Subfamily.UNEMPLOYMENT,
    "Youth Training Allowance": Subfamily.UNEMPLOYMENT,
    "Parenting Payment Partnered": Subfamily.PARENTING,
    "Parenting Payment Single": Subfamily.PARENTING,
    "Mature Age Partner Allowance": Subfamily.PARTNER,
    "Partner Allowance": Subfamily.PARTNER,
    "Wife Pension Age": Subfamily.PARTNER,
    "Wife Pension DSP": Subfamily.PARTNER,
    "Exceptional Circumstances Payment": Subfamily.CRISIS,
    "Special Benefit": Subfamily.CRISIS,
    "Austudy": Subfamily.OTHER_IS,
    "Bereavement Allowance": Subfamily.OTHER_IS,
    "Farm Family Restart": Subfamily.OTHER_IS,
    "Widow Allowance": Subfamily.OTHER_IS,
    "Widow B Pension": Subfamily.OTHER_IS,
    "Mature Age Allowance": Subfamily.OTHER_IS,
    "Sickness Allowance": Subfamily.OTHER_IS,
    "Youth Allowance (Apprentice)": Subfamily.OTHER_IS,
    "Youth Allowance (Student)": Subfamily.OTHER_IS,
}

# Centrelink-administered payments that are not income support in their own right
_NON_IS_CODES = (
    "Family Tax Benefit A",
    "Family Tax Benefit B",
    "Rental Assistance Family",
    "Rental Assistance Parenting",
    "Rental Assistance Newstart",
    "Rental Assistance Pension",
    "Rental Assistance Abstudy",
    "Remote Area Allowance",
    "Crisis Payment",
)

TAXONOMY: Dict[str, PaymentCategory] = {
    **{
        code: PaymentCategory(code, True, subfamily)
        for code, subfamily in _IS_CODES.items()
    },
    **{code: PaymentCategory(code, False, Subfamily.NON_IS) for code in _NON_IS_CODES},
}


def classify_payment(code: str) -> PaymentCategory:
    """Map a payment code to its category; unknown codes are a hard error."""
    try:
        return TAXONOMY[code]
    except KeyError:
        raise UnknownPaymentCodeError(code) from None


def income_support_codes() -> FrozenSet[str]:
    return frozenset(code for code, cat in TAXONOMY.items() if cat.is_income_support)


@dataclass(frozen=True, slots=True)
class PaymentFilter:
    """Selects the spells that count towards a duration, indicator or outcome.

    ``any-is`` accepts every income-support code, ``any-payment`` every
    Centrelink-administered code. Otherwise a spell passes when its subfamily
    or its exact code is listed.
    """

    any_is: bool = False
    any_payment: bool = False
    subfamilies: FrozenSet[Subfamily] = frozenset()
    codes: FrozenSet[str] = frozenset()

    def accepts(self, category: PaymentCategory) -> bool:
        if self.any_payment:
            return True
        if self.any_is and category.is_income_support:
            return True
        return category.subfamily in self.subfamilies or category.code in self.codes

    @classmethod
    def parse(cls, spec: Union[str, "PaymentFilter", Iterable[str]]) -> "PaymentFilter":
        """Build a filter from ``"any-is"``, ``"any-payment"`` or a list of names."""
        if isinstance(spec, PaymentFilter):
            return spec
        if isinstance(spec, str):
            if spec == "any-is":
                return ANY_IS
            if spec == "any-payment":
                return ANY_PAYMENT
            spec = [spec]
        subfamilies, codes = set(), set()
        for item in spec:
            if isinstance(item, Subfamily):
                subfamilies.add(item)
                continue
            try:
                subfamilies.add(Subfamily(item))
                continue
            except ValueError:
                pass
            if item not in TAXONOMY:
                raise ConfigError(f"payment filter names unknown subfamily or code {item!r}")
            codes.add(item)
        if not subfamilies and not codes:
            raise ConfigError("payment filter is empty")
        return cls(subfamilies=frozenset(subfamilies), codes=frozenset(codes))


ANY_IS = PaymentFilter(any_is=True)
ANY_PAYMENT = PaymentFilter(any_payment=True)
UNEMPLOYMENT = PaymentFilter(subfamilies=frozenset({Subfamily.UNEMPLOYMENT}))
