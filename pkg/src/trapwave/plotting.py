import numpy as np


def plot_report(report, path):
    """Frequency vs position with target curve, plus relative-deviation panel, as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    z_t = report.column("z_target") * 1e3
    w_t = report.column("omega_target") / (2e3 * np.pi)
    z_m = report.column("z_measured") * 1e3
    w_m = report.column("omega_measured") / (2e3 * np.pi)
    err = report.column("uncertainty") / (2e3 * np.pi)

    fig, (ax, axr) = plt.subplots(2, 1, sharex=True, figsize=(6, 5), gridspec_kw={"height_ratios": [2, 1]})
    ax.fill_between(z_m, w_m - err, w_m + err, color="C0", alpha=0.2, lw=0, label="0.6% uncertainty")
    ax.plot(z_m, w_m, "o", ms=2, color="C0", label="probed")
    ax.plot(z_t, w_t, "-", color="k", lw=0.8, label="target")
    ax.set_ylabel("axial frequency (kHz)")
    ax.legend(frameon=False, fontsize="small", loc="upper right")
    axr.plot(z_t, report.column("deviation"), "o", ms=2)
    axr.set_ylabel("relative deviation")
    axr.set_xlabel("z (mm)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
