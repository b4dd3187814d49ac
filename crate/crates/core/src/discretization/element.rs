//! Quadratic Lagrange basis on straight triangles and reference rules.
//!
//! Local node order: vertices 0, 1, 2, then the midpoints of the edges
//! (0,1), (1,2), (2,0). This matches `TruncatedMesh::cell_edges`, where
//! local edge `k` joins vertices `k` and `k + 1`.

use std::sync::OnceLock;

use crate::quadrature::gauss_legendre;

/// Gradients of the barycentric coordinates of a triangle.
pub fn lambda_gradients(p: [[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut out = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        out[i] = [(p[j][1] - p[k][1]) / det, (p[k][0] - p[j][0]) / det];
    }
    out
}

/// Values of the six quadratic shape functions.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Physical gradients of the six quadratic shape functions.
pub fn p2_gradients(l: [f64; 3], dl: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut g = [[0.0; 2]; 6];
    for d in 0..2 {
        g[0][d] = (4.0 * l[0] - 1.0) * dl[0][d];
        g[1][d] = (4.0 * l[1] - 1.0) * dl[1][d];
        g[2][d] = (4.0 * l[2] - 1.0) * dl[2][d];
        g[3][d] = 4.0 * (l[0] * dl[1][d] + l[1] * dl[0][d]);
        g[4][d] = 4.0 * (l[1] * dl[2][d] + l[2] * dl[1][d]);
        g[5][d] = 4.0 * (l[2] * dl[0][d] + l[0] * dl[2][d]);
    }
    g
}

/// Barycentric coordinates of the six local nodes.
pub const NODE_LAMBDA: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

/// Point of a reference rule: barycentric coordinates and a weight
/// normalized so that the weights sum to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefPoint {
    pub lambda: [f64; 3],
    pub w: f64,
}

const MAX_COLLAPSED: usize = 10;

/// Collapsed (Duffy) Gauss rule with `n²` points, exact for total degree `2n - 2`.
pub fn triangle_rule(n: usize) -> &'static [RefPoint] {
    static RULES: [OnceLock<Vec<RefPoint>>; MAX_COLLAPSED + 1] = [const { OnceLock::new() }; MAX_COLLAPSED + 1];
    assert!((1..=MAX_COLLAPSED).contains(&n), "collapsed rule order {n} unsupported");
    RULES[n].get_or_init(|| {
        let (x, w) = gauss_legendre(n);
        let mut out = Vec::with_capacity(n * n);
        for (xu, wu) in x.iter().zip(w) {
            let u = 0.5 * (xu + 1.0);
            for (xv, wv) in x.iter().zip(w) {
                let v = 0.5 * (xv + 1.0);
                let (xi, eta) = (u, v * (1.0 - u));
                // weights of [0,1]² are w/2 each; the Jacobian is (1 - u); area 1/2
                let weight = 0.25 * wu * wv * (1.0 - u) * 2.0;
                out.push(RefPoint { lambda: [1.0 - xi - eta, xi, eta], w: weight });
            }
        }
        out
    })
}

/// Physical point of barycentric coordinates `l` in triangle `p`.
pub fn map_point(p: &[[f64; 2]; 3], l: [f64; 3]) -> [f64; 2] {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}
