"""Built-in models.

The mechanical models are stored as model-file text (they double as format
examples); the field models are generated by :mod:`ciquant.fields`.
"""

from __future__ import annotations

from .model import ModelError, ModelSpec, load_model

CHRIST_LEE = """\
# Christ-Lee model with V(r) = r^2/2, gauge epsilon(t) = 0
[model]
name = christ-lee

[symbols]
t : time
r, theta, z : variable
p_r : momentum of=r
p_theta : momentum of=theta
p_z : momentum of=z
a, b : constant

[lagrangian]
1/2*(r_dot^2 + r^2*(theta_dot - z)^2) - 1/2*r^2

[hamiltonian]
1/2*(a^2 + b^2)

[solution]
r = a*cos(t) + b*sin(t)
theta = 0
z = 0
p_r = -a*sin(t) + b*cos(t)
p_theta = 0
p_z = 0

[inverse]
a = r*cos(t) - p_r*sin(t)
b = r*sin(t) + p_r*cos(t)

[gauge]
epsilon(t) = 0, so theta = 0 and z = 0

[golden]
{a, b} = 1
{b, a} = -1
{r, p_r} = 1
{r, r} = 0
{theta, p_theta} = 0
{z, p_z} = 0
{r, theta} = 0
{p_r, p_z} = 0
"""

FERMIONIC_OSCILLATOR = """\
# fermionic oscillator, psi and psibar independent odd variables
[model]
name = fermionic-oscillator
note = {psi, Pi_psi} = -1/2 follows from this solution and the graded bracket (cross-checked in the exterior-algebra representation); the value 2 sometimes quoted for this pair does not

[symbols]
t : time
psi, psibar : variable odd
Pi_psi : momentum odd of=psi
Pi_psibar : momentum odd of=psibar
a : constant odd conj=abar
abar : constant odd conj=a
omega : parameter value=1.0

[lagrangian]
i/2*(psibar*psi_dot - psibar_dot*psi) - omega*psibar*psi

[hamiltonian]
omega*abar*a

[solution]
psi = a*exp(-i*omega*t)
psibar = abar*exp(i*omega*t)
Pi_psi = -i/2*abar*exp(i*omega*t)
Pi_psibar = -i/2*a*exp(-i*omega*t)

[inverse]
a = psi*exp(i*omega*t)
abar = psibar*exp(-i*omega*t)

[golden]
{a, abar} = -i
{abar, a} = -i
{a, a} = 0
{abar, abar} = 0
{psi, psibar} = -i
{psibar, psi} = -i
{psi, Pi_psi} = -1/2
{psibar, Pi_psibar} = -1/2
{psi, psi} = 0
"""

BOSONIC_OSCILLATOR = """\
# harmonic oscillator control model
[model]
name = bosonic-oscillator

[symbols]
t : time
q : variable
p : momentum of=q
a : constant conj=astar
astar : constant conj=a
omega : parameter value={omega}

[lagrangian]
1/2*(q_dot^2 - omega^2*q^2)

[solution]
q = a*exp(-i*omega*t) + astar*exp(i*omega*t)
p = -i*omega*a*exp(-i*omega*t) + i*omega*astar*exp(i*omega*t)

[inverse]
a = 1/2*(q + i*omega^-1*p)*exp(i*omega*t)
astar = 1/2*(q - i*omega^-1*p)*exp(-i*omega*t)

[golden]
{{a, astar}} = -1/2*i*omega^-1
{{a, a}} = 0
{{q, p}} = 1
{{q, q}} = 0
{{p, p}} = 0
"""

FREE_PARTICLE = """\
# free particle; the source term eta*q exercises the regularized derivation
[model]
name = free-particle

[symbols]
t : time
q : variable
p : momentum of=q
a, b : constant
eta : parameter value=0.001

[lagrangian]
1/2*q_dot^2

[solution]
q = a + b*t
p = b

[inverse]
a = q - p*t
b = p

[source_term]
coupling = eta
variables = q
q = a + b*t + 1/2*eta*t^2
p = b + eta*t

[golden]
{a, b} = 1
{q, p} = 1
"""

MECHANICAL = {
    "christ-lee": lambda **kw: CHRIST_LEE,
    "fermionic-oscillator": lambda **kw: FERMIONIC_OSCILLATOR,
    "bosonic-oscillator": lambda omega=1.0, **kw: BOSONIC_OSCILLATOR.format(omega=float(omega)),
    "free-particle": lambda **kw: FREE_PARTICLE,
}

FIELD_MODELS = ("sigma-o2", "majorana", "lightcone-scalar", "chiral-boson")
BUILTIN_NAMES = tuple(MECHANICAL) + FIELD_MODELS
DEFAULT_PARAMS = {
    "sigma-o2": {"N": 4},
    "majorana": {"N": 2},
    "lightcone-scalar": {"N": 4},
    "chiral-boson": {"N": 4},
}


def builtin(name: str, N: int | None = None, L: float | None = None, m: float | None = None, **kw) -> ModelSpec:
    """Built-in model by name; field models take a truncation (N, L, m)."""
    if name in MECHANICAL:
        return load_model(MECHANICAL[name](**kw))
    if name not in FIELD_MODELS:
        raise ModelError(f"unknown model {name!r}; known: {', '.join(BUILTIN_NAMES)}")
    from . import fields

    params = dict(DEFAULT_PARAMS[name])
    if N is not None:
        params["N"] = N
    if L is not None:
        params["L"] = L
    if m is not None:
        params["m"] = m
    if name == "sigma-o2":
        params.pop("m", None)
        return fields.truncate_sigma(**params)
    if name == "majorana":
        return fields.build_majorana(**params)
    if name == "lightcone-scalar":
        return fields.build_lightcone_scalar(**params)
    params.pop("m", None)
    return fields.build_chiral_boson(**params)
