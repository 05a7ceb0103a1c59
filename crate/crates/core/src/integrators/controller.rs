//! Step-size control.

/// Adaptive step state. Errors are measured in a weighted norm, so the
/// tolerance of the step formula is 1.
#[derive(Debug, Clone)]
pub struct StepController {
    pub atol: f64,
    pub rtol: f64,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    /// Order of the embedded estimate.
    pub order_hat: u32,
    pub err_prev: Option<f64>,
    pub dt_prev: Option<f64>,
    last_rejected: bool,
}

impl StepController {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Self {
            atol,
            rtol,
            safety: 0.8,
            fac_min: 0.1,
            fac_max: 10.0,
            order_hat: 1,
            err_prev: None,
            dt_prev: None,
            last_rejected: false,
        }
    }

    /// Proposes the next step from the error of the step just attempted with
    /// `dt_cur`; records history only for accepted steps.
    pub fn propose_dt(&mut self, err_new: f64, dt_cur: f64) -> (f64, bool) {
        let accept = err_new <= 1.0;
        let q = 1.0 / (self.order_hat as f64 + 1.0);
        let mut fac = if err_new <= 0.0 {
            self.fac_max
        } else {
            let base = self.safety * (1.0 / err_new).powf(q);
            match (self.err_prev, self.dt_prev) {
                (Some(ep), Some(dp)) if ep > 0.0 => base * (ep / err_new).powf(q) * (dt_cur / dp),
                _ => base,
            }
        };
        if !fac.is_finite() {
            fac = self.fac_max;
        }
        if !accept {
            // the history factor may not push a retry back up: repeated
            // rejections would otherwise settle on a fixed step with err > 1
            fac = fac.min(self.safety * (1.0 / err_new).powf(q));
        }
        fac = fac.clamp(self.fac_min, self.fac_max);
        if accept && self.last_rejected {
            fac = fac.min(1.0);
        }
        if accept {
            self.err_prev = Some(err_new.max(1e-16));
            self.dt_prev = Some(dt_cur);
        }
        self.last_rejected = !accept;
        (fac * dt_cur, accept)
    }
}
