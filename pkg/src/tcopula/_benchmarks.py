"""Published benchmark values diffed by the ``replay-table`` command.

Values are rounded exactly as published. T2 is deterministic (tail
coefficients); the remaining tables are Monte Carlo or replicate studies,
so the replay declares a tolerance per budget next to each diff.
"""

# T1: upper-tail asymmetry ratio at q = 0.99, first dof fixed at 2.
# rows: second dof; columns: correlation 0.5 / 0.7 / 0.9
T1_NU2 = (3, 4, 5, 6, 8, 10, 15, 20, 50)
T1_RHO = (0.5, 0.7, 0.9)
T1 = {
    3: (1.248, 1.303, 1.426),
    4: (1.379, 1.447, 1.526),
    5: (1.438, 1.511, 1.530),
    6: (1.459, 1.536, 1.524),
    8: (1.463, 1.525, 1.496),
    10: (1.458, 1.510, 1.469),
    15: (1.446, 1.475, 1.410),
    20: (1.443, 1.442, 1.392),
    50: (1.334, 1.362, 1.372),
}

# T2: joint-tail dependence coefficient at rho = 0.7 over a dof grid.
T2_DOFS = (2, 3, 4, 5, 6, 8, 10, 15, 20)
T2 = (
    (0.519, 0.465, 0.402, 0.343, 0.291, 0.208, 0.147, 0.061, 0.024),
    (0.465, 0.448, 0.408, 0.361, 0.315, 0.235, 0.172, 0.076, 0.032),
    (0.402, 0.408, 0.391, 0.360, 0.323, 0.251, 0.191, 0.090, 0.041),
    (0.343, 0.362, 0.360, 0.343, 0.318, 0.259, 0.203, 0.102, 0.048),
    (0.292, 0.316, 0.323, 0.318, 0.303, 0.258, 0.209, 0.111, 0.055),
    (0.208, 0.235, 0.252, 0.259, 0.258, 0.239, 0.207, 0.124, 0.067),
    (0.147, 0.172, 0.191, 0.203, 0.209, 0.207, 0.191, 0.129, 0.075),
    (0.061, 0.076, 0.090, 0.102, 0.112, 0.124, 0.129, 0.112, 0.080),
    (0.025, 0.033, 0.041, 0.048, 0.055, 0.067, 0.075, 0.080, 0.068),
)

# T4a: portfolio 0.99 VaR / ES, standard normal margins, weights (1, -1),
# true model rho = 0.9, dofs (2, 10). Fields: var, rel_var, es, rel_es.
# Note: the published gaussian row is inconsistent with the closed form
# implied by its own correlation (1.195 / 1.369); the replay reports both.
T4A = {
    "gaussian": (1.285, -0.039, 1.475, -0.152),
    "t": (1.201, -0.102, 1.471, -0.155),
    "multidof": (1.337, 0.0, 1.741, 0.0),
}
T4A_GAUSSIAN_CLOSED_FORM = (1.1953, 1.3694)

# T4b: same portfolio with standard-t margins of common dof nu_m.
T4B = {
    2: {"t": (3.739, -0.238, 8.229, -0.282), "multidof": (4.907, 0.0, 11.46, 0.0)},
    5: {"t": (1.584, -0.165, 2.061, -0.230), "multidof": (1.898, 0.0, 2.676, 0.0)},
    50: {"t": (1.219, -0.106, 1.493, -0.160), "multidof": (1.363, 0.0, 1.777, 0.0)},
}

# T5a/b: finite-sample estimator study, true (rho, nu1, nu2) = (0.9, 2, 10),
# N = 400. Columns: E, sqrt(Var), sqrt(MSE) for rho, nu1, nu2.
T5_K = (50, 200, 800)
T5A = {
    50: (0.886, 0.038, 0.040, 3.01, 2.68, 2.86, 14.8, 16.8, 17.5),
    200: (0.884, 0.017, 0.024, 2.41, 1.51, 1.57, 11.7, 10.9, 11.0),
    800: (0.885, 0.010, 0.018, 2.03, 0.597, 0.598, 9.15, 3.83, 3.92),
}
T5B = {
    50: (0.901, 0.029, 0.029, 2.86, 2.23, 2.39, 17.6, 18.8, 20.3),
    200: (0.900, 0.015, 0.015, 2.44, 1.65, 1.71, 14.0, 12.1, 12.7),
    800: (0.900, 0.007, 0.007, 2.10, 0.672, 0.619, 11.1, 4.75, 5.03),
}
# T5c: sqrt of the average ML-theory variance for rho, nu1, nu2.
T5C = {
    50: (0.031, 6.14, 60.3),
    200: (0.015, 1.99, 24.9),
    800: (0.007, 0.427, 3.57),
}

# T6a/b: paired small-sample study, mean and stdev over N = 400 of
# (Q_t, Q_mdof, delta_Q, ES_t, ES_mdof, delta_ES); normal / t(5) margins.
T6A = {
    50: {"mean": (1.246, 1.335, -0.089, 1.531, 1.737, -0.206),
         "stdev": (0.206, 0.204, 0.117, 0.330, 0.325, 0.208)},
    200: {"mean": (1.246, 1.331, -0.085, 1.525, 1.726, -0.201),
          "stdev": (0.102, 0.115, 0.064, 0.167, 0.190, 0.119)},
    800: {"mean": (1.252, 1.332, -0.080, 1.533, 1.727, -0.194),
          "stdev": (0.055, 0.065, 0.041, 0.088, 0.107, 0.075)},
}
T6B = {
    50: {"mean": (1.651, 1.895, -0.244, 2.196, 2.694, -0.498),
         "stdev": (0.236, 0.263, 0.181, 0.362, 0.393, 0.310)},
    200: {"mean": (1.651, 1.890, -0.239, 2.165, 2.667, -0.502),
          "stdev": (0.113, 0.144, 0.098, 0.164, 0.219, 0.172)},
    800: {"mean": (1.655, 1.896, -0.241, 2.157, 2.671, -0.514),
          "stdev": (0.061, 0.079, 0.059, 0.089, 0.116, 0.096)},
}

# true model shared by the study tables
STUDY_RHO = 0.9
STUDY_DOFS = (2.0, 10.0)
