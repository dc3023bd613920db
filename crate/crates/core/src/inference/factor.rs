//! Dense factors over discretized variables, with log scaling.

/// Row-major table over `vars`; the last variable varies fastest.
/// The represented function is `values * exp(log_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub vars: Vec<usize>,
    pub card: Vec<usize>,
    pub values: Vec<f64>,
    pub log_scale: f64,
}

impl Factor {
    pub fn scalar(v: f64) -> Self {
        Self { vars: Vec::new(), card: Vec::new(), values: vec![v], log_scale: 0.0 }
    }

    pub fn new(vars: Vec<usize>, card: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(card.iter().product::<usize>(), values.len());
        Self { vars, card, values, log_scale: 0.0 }
    }

    fn strides(card: &[usize]) -> Vec<usize> {
        let mut s = vec![1; card.len()];
        for i in (0..card.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * card[i + 1];
        }
        s
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut card = self.card.clone();
        for (v, c) in other.vars.iter().zip(&other.card) {
            if !vars.contains(v) {
                vars.push(*v);
                card.push(*c);
            }
        }
        let total: usize = card.iter().product();
        let map_strides = |f: &Factor| -> Vec<usize> {
            let own = Self::strides(&f.card);
            vars.iter().map(|v| f.vars.iter().position(|x| x == v).map(|i| own[i]).unwrap_or(0)).collect()
        };
        let sa = map_strides(self);
        let sb = map_strides(other);
        let mut values = vec![0.0; total];
        let mut idx = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for out in values.iter_mut() {
            *out = self.values[ia] * other.values[ib];
            // increment the mixed-radix counter
            for d in (0..vars.len()).rev() {
                idx[d] += 1;
                ia += sa[d];
                ib += sb[d];
                if idx[d] < card[d] {
                    break;
                }
                ia -= sa[d] * card[d];
                ib -= sb[d] * card[d];
                idx[d] = 0;
            }
        }
        let mut f = Factor { vars, card, values, log_scale: self.log_scale + other.log_scale };
        f.rescale();
        f
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let outer: usize = self.card[..pos].iter().product();
        let n = self.card[pos];
        let inner: usize = self.card[pos + 1..].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let base = (o * n + k) * inner;
                let dst = &mut values[o * inner..(o + 1) * inner];
                for (d, s) in dst.iter_mut().zip(&self.values[base..base + inner]) {
                    *d += s;
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut card = self.card.clone();
        vars.remove(pos);
        card.remove(pos);
        let mut f = Factor { vars, card, values, log_scale: self.log_scale };
        f.rescale();
        f
    }

    /// Divides by the maximum entry and moves it into `log_scale`.
    pub fn rescale(&mut self) {
        let m = self.values.iter().copied().fold(0.0f64, f64::max);
        if m > 0.0 && m.is_finite() && m != 1.0 {
            let inv = 1.0 / m;
            self.values.iter_mut().for_each(|v| *v *= inv);
            self.log_scale += m.ln();
        }
    }

    /// Reorders the table so that variables appear in `order`.
    pub fn permuted(&self, order: &[usize]) -> Factor {
        if order == self.vars.as_slice() {
            return self.clone();
        }
        let positions: Vec<usize> = order.iter().map(|v| self.vars.iter().position(|x| x == v).unwrap()).collect();
        let card: Vec<usize> = positions.iter().map(|&p| self.card[p]).collect();
        let own = Self::strides(&self.card);
        let src: Vec<usize> = positions.iter().map(|&p| own[p]).collect();
        let mut values = Vec::with_capacity(self.values.len());
        let mut idx = vec![0usize; order.len()];
        let mut off = 0usize;
        for _ in 0..self.values.len() {
            values.push(self.values[off]);
            for d in (0..order.len()).rev() {
                idx[d] += 1;
                off += src[d];
                if idx[d] < card[d] {
                    break;
                }
                off -= src[d] * card[d];
                idx[d] = 0;
            }
        }
        Factor { vars: order.to_vec(), card, values, log_scale: self.log_scale }
    }

    pub fn ln_total(&self) -> f64 {
        self.values.iter().sum::<f64>().ln() + self.log_scale
    }
}
