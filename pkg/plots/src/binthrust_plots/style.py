"""Fixed per-controller styling, chosen to stay legible in grayscale."""

CONTROLLER_STYLE = {
    "mimpc": {"color": "#1b1b1b", "marker": "o", "linestyle": "-",
              "label": "MIMPC"},
    "continuous": {"color": "#7a7a7a", "marker": "s", "linestyle": "--",
                   "label": "continuous MPC"},
    "informed": {"color": "#404040", "marker": "^", "linestyle": "-.",
                 "label": "binary informed MPC"},
}

FALLBACK_STYLE = {"color": "#9c9c9c", "marker": "x", "linestyle": ":"}


def style_for(controller: str) -> dict:
    return CONTROLLER_STYLE.get(controller, dict(FALLBACK_STYLE, label=controller))
