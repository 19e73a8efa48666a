"""Checking the sufficient gain conditions of the stability argument.

The analysis constants (the zeta bounds, beta2_max and rho) are not
computable from the model, so the checker takes them as a user certificate
and reports each condition as satisfied, unsatisfied or indeterminate. The
default flight gains meet k1 > 1/2 but not k2 > beta2_max + 1: the gains that
work in practice sit outside the sufficient region.

    python demos/gain_conditions.py
"""

from dualarm_rise import ControllerGains, GainCertificate, check_gain_conditions


def show(title, gains, cert=None):
    report = check_gain_conditions(gains, cert)
    print(f"\n{title}  (lambda = {report.lam:g})")
    for line in report.lines():
        print("  " + line)


def main():
    flight = ControllerGains()
    show("flight gains, no certificate", flight)
    show("flight gains, zeta = (1, 1, 1, 1)", flight, GainCertificate(zeta=(1, 1, 1, 1)))
    tuned = ControllerGains(k2=2.5, B1=[8.0, 8.0, 8.0], K_s=[30.0, 30.0, 30.0])
    show("gains inside the sufficient region", tuned,
         GainCertificate(zeta=(1, 1, 1, 1, 0.2), beta2_max=0.5, rho=2.0))


if __name__ == "__main__":
    main()
