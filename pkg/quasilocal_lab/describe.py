"""Formula registry printed by `lab.py describe TOPIC`."""
from typing import Dict, NamedTuple, Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from quasilocal_lab import constants
from quasilocal_lab.errors import UnknownTopicError


class Topic(NamedTuple):
    title: str
    formula: str
    conventions: str
    reference: str = ""


_NORMALIZATION = (
    "raw = bare surface integral; normalized = raw / ((n-1) omega_(n-1)) = raw / 8 pi for n = 3. "
    "Reports carry both."
)

TOPICS: Dict[str, Topic] = {
    "BY": Topic(
        "Brown-York mass",
        "m_BY = int_Sigma (H0 - H) dsigma",
        "H0: mean curvature of the isometric embedding of (Sigma, gamma) in R^3. "
        "Admissible iff H > 0 everywhere. " + _NORMALIZATION,
        "Brown and York, Phys. Rev. D 47 (1993) 1407; positivity: Shi and Tam, J. Differential Geom. 62 (2002) 79, Theorem 4.1.",
    ),
    "KLY": Topic(
        "Kijowski-Liu-Yau mass",
        "m_KLY = int_Sigma (H0 - sqrt(H^2 - (tr_Sigma k)^2)) dsigma",
        "Admissible iff H > |tr_Sigma k| everywhere. " + _NORMALIZATION,
        "Kijowski, Gen. Relativ. Gravit. 29 (1997) 307; Liu and Yau, Phys. Rev. Lett. 90 (2003) 231102.",
    ),
    "W": Topic(
        "Momentum-corrected mass",
        "W = int_Sigma (H0 - (H - |pi(nu, .)|)) dsigma,  pi = k - (tr_g k) g",
        "|pi(nu, .)| is the g-norm of the full covector including its normal component. "
        "Admissible iff H > |pi(nu, .)| everywhere. Ordering on admissible surfaces: W >= m_KLY >= m_BY. "
        + _NORMALIZATION,
        "Null-observer energy built on the Shi-Tam boundary comparison (Shi and Tam 2002, Theorem 4.1); "
        "positivity for spin data with the dominant energy condition via the positive mass theorem with corners.",
    ),
    "WY": Topic(
        "Wang-Yau quasilocal energy",
        "E(tau) = inf_phi int h_ref - inf_phi int h_phys,\n"
        "h = sqrt(1 + |grad tau|^2) (H cosh phi + tr_Sigma k sinh phi) - phi laplacian(tau) + omega(grad tau)",
        "Reference side embeds gamma + d tau^2 in R^3 and lifts it to Minkowski space as the graph of tau. "
        "The infimum runs over the boosted-frame family and is a local minimum. "
        "At tau = 0 the physical infimum is int sqrt(H^2 - (tr k)^2), so E(0) = m_KLY. " + _NORMALIZATION,
        "Wang and Yau, Commun. Math. Phys. 288 (2009) 919; admissibility: their Definition 5.1.",
    ),
    "X-modified": Topic(
        "Vector-field modified energy",
        "E_X = int_Sigma (H0 - (H - <X, nu>)) dsigma,  u = H0 / (H - <X, nu>)",
        "Bulk hypotheses: R + 2 div X - 2 |X|^2 >= 0 in the region and H - <X, nu> > 0 on the boundary. "
        "X = 0 reduces E_X to m_BY. " + _NORMALIZATION,
        "Weighted and charged variants of the positive mass theorem with corners.",
    ),
    "adm": Topic(
        "ADM energy-momentum",
        "E = 1/(2 (n-1) omega_(n-1)) lim int_(S_r) (d_i g_ij - d_j g_ii) nu^j dA\n"
        "P_i = 1/((n-1) omega_(n-1)) lim int_(S_r) pi_ij nu^j dA,  mass = sqrt(E^2 - |P|^2)",
        "Euclidean normals and area elements on coordinate spheres; the limit is a polynomial "
        "extrapolation in 1/r over at least three radii. The mass is flagged invalid when E^2 < |P|^2.",
        "Arnowitt, Deser and Misner (1962); well-definedness: Bartnik, Comm. Pure Appl. Math. 39 (1986) 661.",
    ),
    "lambda": Topic(
        "Shield width function",
        "lambda(d) = (sqrt(sigma) n / 2) tan(sqrt(sigma) n d / 2),  0 <= d < pi / (sqrt(sigma) n)",
        "sigma = 0 gives lambda = 0. d at or beyond the tangent pole is out of domain.",
        "Dominant energy shields in the positive mass theorem with corners and arbitrary ends (Lee, Lesourd and Unger).",
    ),
    "psi": Topic(
        "Shield boundary threshold",
        "Psi(d, l) = (2/n) lambda(d) / (1 - l lambda(d))   if d < pi/(sqrt(sigma) n) and l < 1/lambda(d)\n"
        "Psi(d, l) = +inf                                 otherwise",
        "Shield conditions: DEC on U0, mu - |J| >= sigma n (n-1) on U0 minus U1, "
        "H - |pi(nu, .)|_(T Sigma) > -Psi(d, l) on the boundary of U0.",
        "Dominant energy shields in the positive mass theorem with corners and arbitrary ends (Lee, Lesourd and Unger).",
    ),
    "fillin": Topic(
        "Fill-in obstruction",
        "f = sqrt((tr_gamma alpha)^2 + |beta|_gamma^2);  criteria: int (H - f) > h0 or min (H - f) >= C0",
        "Bartnik data (gamma, alpha, H, beta). Both criteria require H > f pointwise. "
        "h0 and C0 are user supplied and echoed in reports. Isotopy to the round metric and the "
        "topology of the fill-in are not checked.",
        "Integral criterion: Shi, Wang, Wei and Zhu, Theorem 1.3; pointwise criterion: Theorem 1.4 there and Shi, Wang and Wei, Theorem 1.2.",
    ),
    "expansions": Topic(
        "Null expansions",
        "theta_plus = H + tr_Sigma k,  theta_minus = H - tr_Sigma k",
        f"Zero band eps_mots, default {constants.EPS_MOTS:g} / r_area. Labels: "
        f"{constants.EXPANSION_MOTS}, {constants.EXPANSION_MITS}, {constants.EXPANSION_BOTH}, "
        f"{constants.EXPANSION_WEAK_OUTER}, {constants.EXPANSION_WEAK_INNER}, {constants.EXPANSION_UNTRAPPED}.",
    ),
    "flow": Topic(
        "Rotationally symmetric extension",
        "g+ = u^2 dr^2 + r^2 dOmega^2,  r (1 - u^-2) = 2m,  Q(r) = r (1 - 1/u),  dQ/dr = -(1 - u)^2 / (2u)",
        "Q is reported normalized; Q_scaled = 8 pi Q. Q is non-increasing and tends to m. "
        "The energy is extrapolated in 1/r and needs r_max >= 100 r0.",
        "Bartnik, J. Differential Geom. 37 (1993) 31 (quasi-spherical metrics); monotonicity: Shi and Tam 2002, Lemma 4.2.",
    ),
    "catalogs": Topic(
        "Catalog data sets",
        "flat: g = delta, k = 0\n"
        "schwarzschild_slice(m): g = delta + 2m x x / (r^2 (r - 2m)), i.e. (1 - 2m/r)^-1 dr^2 + r^2 dOmega^2, k = 0, chart r > 2m\n"
        "cmc_hyperboloid(a): g = delta - x x / (a^2 + |x|^2), k = g / a\n"
        "perturbed_flat(eps, length): g = delta, k = eps (delta + x x / L^2) / (1 + |x|^2 / L^2)",
        "Analytic first derivatives where available, 4th-order centered differences otherwise.",
    ),
    "conventions": Topic(
        "Conventions",
        "H = div_g nu with nu the outward g-unit normal; round sphere of radius r has H = 2/r",
        "tr_Sigma k = tr_gamma of k restricted to T Sigma. omega(X) = k(nu, X) for tangent X. "
        "n = 3, omega_2 = 4 pi. " + _NORMALIZATION,
    ),
}


def describe(topic: str) -> Topic:
    if topic not in TOPICS:
        raise UnknownTopicError(topic, sorted(TOPICS))
    return TOPICS[topic]


def describe_text(topic: str) -> str:
    t = describe(topic)
    text = f"{t.title}\n\n{t.formula}\n\n{t.conventions}\n"
    if t.reference:
        text += f"\nReference: {t.reference}\n"
    return text


def print_topic(topic: str, console: Optional[Console] = None):
    console = console or Console()
    t = describe(topic)
    console.print(Panel(t.formula, title=f"[bold]{topic}[/bold]: {t.title}", expand=False))
    console.print(t.conventions, markup=False)
    if t.reference:
        console.print(f"Reference: {t.reference}", markup=False, style="dim")


def print_topics(console: Optional[Console] = None):
    console = console or Console()
    table = Table(title="describe topics")
    table.add_column("topic")
    table.add_column("title")
    for name, t in TOPICS.items():
        table.add_row(name, t.title)
    console.print(table)
