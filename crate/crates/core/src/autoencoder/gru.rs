use nalgebra::{DMatrix, DVector};

pub(crate) const UPDATE: usize = 0;
pub(crate) const RESET: usize = 1;
pub(crate) const CANDIDATE: usize = 2;

/// Weights of one GRU layer, gates ordered update, reset, candidate.
///
/// ```text
/// z = sigmoid(W_z x + U_z h + b_z)
/// r = sigmoid(W_r x + U_r h + b_r)
/// c = tanh(W_c x + U_c (r * h) + b_c)
/// h' = (1 - z) * h + z * c
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    /// Input maps, hidden x input.
    pub input: [DMatrix<f64>; 3],
    /// Recurrent maps, hidden x hidden.
    pub recurrent: [DMatrix<f64>; 3],
    pub bias: [DVector<f64>; 3],
}

pub(crate) struct StepCache {
    pub x: DVector<f64>,
    pub h_prev: DVector<f64>,
    pub z: DVector<f64>,
    pub r: DVector<f64>,
    pub c: DVector<f64>,
    pub h: DVector<f64>,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl GruWeights {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input: std::array::from_fn(|_| DMatrix::zeros(hidden, input_dim)),
            recurrent: std::array::from_fn(|_| DMatrix::zeros(hidden, hidden)),
            bias: std::array::from_fn(|_| DVector::zeros(hidden)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.bias[0].len()
    }

    pub(crate) fn step(&self, x: &DVector<f64>, h_prev: &DVector<f64>) -> StepCache {
        let gate = |g: usize, h: &DVector<f64>| {
            &self.input[g] * x + &self.recurrent[g] * h + &self.bias[g]
        };
        let z = gate(UPDATE, h_prev).map(sigmoid);
        let r = gate(RESET, h_prev).map(sigmoid);
        let rh = r.component_mul(h_prev);
        let c = gate(CANDIDATE, &rh).map(f64::tanh);
        let h = h_prev + z.component_mul(&(&c - h_prev));
        StepCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            z,
            r,
            c,
            h,
        }
    }

    pub(crate) fn forward(&self, x: &DVector<f64>, h_prev: &DVector<f64>) -> DVector<f64> {
        self.step(x, h_prev).h
    }

    /// Accumulates weight gradients into `grad` and returns `(dx, dh_prev)`.
    pub(crate) fn backward(
        &self,
        cache: &StepCache,
        dh: &DVector<f64>,
        grad: &mut GruWeights,
    ) -> (DVector<f64>, DVector<f64>) {
        let StepCache {
            x, h_prev, z, r, c, ..
        } = cache;
        let dz = dh.component_mul(&(c - h_prev));
        let dc = dh.component_mul(z);
        let mut dh_prev = dh.component_mul(&z.map(|v| 1.0 - v));

        let dc_pre = dc.component_mul(&c.map(|v| 1.0 - v * v));
        let rh = r.component_mul(h_prev);
        grad.input[CANDIDATE].ger(1.0, &dc_pre, x, 1.0);
        grad.recurrent[CANDIDATE].ger(1.0, &dc_pre, &rh, 1.0);
        grad.bias[CANDIDATE] += &dc_pre;
        let drh = self.recurrent[CANDIDATE].tr_mul(&dc_pre);
        let dr = drh.component_mul(h_prev);
        dh_prev += drh.component_mul(r);
        let mut dx = self.input[CANDIDATE].tr_mul(&dc_pre);

        let dz_pre = dz.component_mul(&z.map(|v| v * (1.0 - v)));
        let dr_pre = dr.component_mul(&r.map(|v| v * (1.0 - v)));
        for (g, d) in [(UPDATE, &dz_pre), (RESET, &dr_pre)] {
            grad.input[g].ger(1.0, d, x, 1.0);
            grad.recurrent[g].ger(1.0, d, h_prev, 1.0);
            grad.bias[g] += d;
            dx += self.input[g].tr_mul(d);
            dh_prev += self.recurrent[g].tr_mul(d);
        }
        (dx, dh_prev)
    }
}
