"""Optional SVG charts.  matplotlib is imported lazily (``pip install artifact[plot]``)."""
from __future__ import annotations

import io


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("SVG output needs matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "aae"  # stable element ids
    import matplotlib.pyplot as plt

    return plt


def _to_svg(fig, plt) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def entropy_chart(report) -> str:
    """Exact, AAE and naive entropies per term."""
    plt = _pyplot()
    labels = [t.term for t in report.terms]
    x = range(len(labels))
    fig, ax = plt.subplots(figsize=(7, 4))
    for attr, style, name in [("exact", "o-", "exact"), ("aae", "s-", "AAE + qSVD"),
                              ("naive", "^--", "naive")]:
        ys = [getattr(t, attr) for t in report.terms]
        if any(y is not None for y in ys):
            ax.plot(x, [float("nan") if y is None else y for y in ys], style, label=name)
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=45)
    ax.set_ylabel("SVD entropy")
    ax.legend()
    fig.tight_layout()
    return _to_svg(fig, plt)


def cost_chart(costs, title: str = "") -> str:
    """L, L1 and L2 against iteration on a log scale."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for col, name in enumerate(["L", "L1", "L2"]):
        ax.semilogy([max(c[col], 1e-16) for c in costs], label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("cost")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _to_svg(fig, plt)
