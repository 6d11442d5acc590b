//! Static documentation of the experiment operations and their parameters.

pub struct OpDoc {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [(&'static str, &'static str, &'static str)],
}

pub const OP_DOCS: &[OpDoc] = &[
    OpDoc {
        name: "lyapunov_spectrum",
        summary: "QR-reorthonormalized Monte Carlo Lyapunov spectrum, pooled over orbits.",
        params: &[
            ("n_steps", "100000", "iterates per orbit"),
            ("n_orbits", "8", "independent orbits"),
            ("k_renorm", "5", "QR re-orthonormalization interval"),
        ],
    },
    OpDoc {
        name: "adjoint_spectrum",
        summary: "Spectra of the cocycle and its adjoint over inverse time, with pooled-stderr comparison.",
        params: &[
            ("n_steps", "100000", "iterates per orbit"),
            ("n_orbits", "8", "independent orbits"),
            ("k_renorm", "5", "QR re-orthonormalization interval"),
        ],
    },
    OpDoc {
        name: "simplicity_report",
        summary: "Full pinching + twisting battery (uniform and non-uniform) with overall verdicts.",
        params: &[
            ("tol_gap", "5e-3", "min subset-sum gap (nats) for pinching"),
            ("tol_margin", "1e-6", "min |minor| for uniform twisting"),
            ("tol_slope", "1e-2", "max |decay slope| per iterate for non-uniform twisting"),
            ("tol_dom", "1e-3", "required excess over 1 of uniform-pinching margins"),
            ("t_samples", "4", "fiber samples for pinching/twisting"),
            ("t_grid", "16", "fiber grid for uniform pinching"),
            ("uniform_n", "12", "steps of the N-step domination products"),
            ("n_pinching", "4000", "steps of the restriction exponent estimates"),
            ("n_oseledets", "80", "flag resolution steps"),
            ("orbit_len", "10000", "fiber-orbit length for decay slopes"),
            ("tol", "1e-12", "holonomy/split truncation tolerance"),
        ],
    },
    OpDoc {
        name: "check_pinching",
        summary: "Subset-sum separation of the fiber-restricted exponents.",
        params: &[
            ("t_samples", "4", "fiber samples"),
            ("n_steps", "4000", "exponent estimation steps"),
            ("tol_gap", "5e-3", "min subset-sum gap (nats)"),
        ],
    },
    OpDoc {
        name: "check_uniform_pinching",
        summary: "Cone-field domination margins of the N-step exterior-power products (part of simplicity_report).",
        params: &[
            ("t_grid", "16", "fiber grid"),
            ("uniform_n", "12", "product length"),
            ("tol_dom", "1e-3", "required excess over 1"),
        ],
    },
    OpDoc {
        name: "check_twisting",
        summary: "Minors of the homoclinic twisting matrix: margins and decay slopes (part of simplicity_report).",
        params: &[
            ("t_samples", "4", "fiber samples"),
            ("orbit_len", "10000", "fiber-orbit length for slopes"),
            ("n_oseledets", "80", "flag resolution steps"),
            ("tol_margin", "1e-6", "min |minor| for the uniform verdict"),
            ("tol_slope", "1e-2", "max |slope| per iterate for the non-uniform verdict"),
            ("tol", "1e-12", "holonomy truncation tolerance"),
        ],
    },
    OpDoc {
        name: "fiber_bunching",
        summary: "Margin curve n -> max ||A^n|| ||(A^n)^-1|| lambda^(n alpha) with a log-linear decay fit.",
        params: &[
            ("n_steps", "24", "curve length"),
            ("samples", "4", "sampled orbits"),
        ],
    },
    OpDoc {
        name: "openness_probe",
        summary: "Random Hölder-bounded perturbations; fraction preserving the uniform-simplicity verdict.",
        params: &[
            ("delta", "1e-4", "Hölder norm bound of the perturbations"),
            ("trials", "20", "number of perturbations"),
        ],
    },
    OpDoc {
        name: "backward_pushforward",
        summary: "Push atomic Grassmannian measures along backward orbits; Dirac-convergence diagnostics.",
        params: &[
            ("l", "1", "Grassmannian rank"),
            ("atoms", "50", "atoms per initial measure"),
            ("measures", "3", "independent initial measures"),
            ("n_list", "[10,25,50,100,200,350,500]", "push depths (list param)"),
        ],
    },
    OpDoc {
        name: "center_exponent",
        summary: "Fiber-derivative exponent along sampled orbits; rotation fibers give exactly zero.",
        params: &[
            ("n_steps", "100000", "iterates per orbit"),
            ("samples", "4", "sampled orbits"),
            ("threshold", "1e-8", "pass threshold on |exponent|"),
        ],
    },
    OpDoc {
        name: "induced_cocycle",
        summary: "First-return blocks on a 1-cylinder: mean return time (Kac) and exponent rescaling.",
        params: &[
            ("cylinder_symbol", "0", "symbol of the return cylinder at index 0"),
            ("n_max", "40000", "orbit length"),
            ("n_orbits", "8", "independent orbits"),
        ],
    },
    OpDoc {
        name: "gap_functional",
        summary: "Volume-ratio gap along an orbit between consecutive invariant lines; growth rate vs n.",
        params: &[
            ("l", "1", "split index (uses lines l and l+1)"),
            ("n_max", "2000", "max product length (doubling schedule)"),
            ("n_sections", "80", "section resolution steps"),
            ("tol", "1e-6", "section stabilization tolerance"),
        ],
    },
    OpDoc {
        name: "mostly_neutral",
        summary: "Chain-rule bound on the fiber derivatives of the iterated maps.",
        params: &[
            ("n_max", "1000", "iterates"),
            ("samples", "4", "sampled orbits"),
            ("c_config", "1.5", "declared bound to check against"),
        ],
    },
    OpDoc {
        name: "holder_norm",
        summary: "Lower estimate of the generator's Hölder norm from sampled pairs.",
        params: &[("samples", "64", "sample points (nested in the seed)")],
    },
];

pub fn describe(op: &str) -> Option<String> {
    let doc = OP_DOCS.iter().find(|d| d.name == op)?;
    let mut out = format!("{}\n  {}\n  parameters:\n", doc.name, doc.summary);
    for (name, default, what) in doc.params {
        out.push_str(&format!("    {name} (default {default}): {what}\n"));
    }
    Some(out)
}
