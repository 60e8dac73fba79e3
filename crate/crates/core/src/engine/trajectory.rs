use std::io::{self, Write};

pub const CSV_HEADER: &str = "t,theta,y,estimate,G,Hhat,eta";

/// One recorded instant of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Applied input (delay loop) or plant output state (diffusion loop).
    pub theta: f64,
    pub y: f64,
    /// θ̂ for the delay loop, Θ̂ for the diffusion loop.
    pub estimate: f64,
    pub grad: f64,
    pub hess: f64,
    pub eta: f64,
    /// L2 norm of the plant field, diffusion loop only.
    pub plant_norm: Option<f64>,
}

/// Column selector for [`Trajectory::column`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Time,
    Theta,
    Y,
    Estimate,
    Grad,
    Hess,
    Eta,
    PlantNorm,
}

/// Uniformly sampled record of a closed-loop run, stored column-wise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub sample_dt: f64,
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    pub y: Vec<f64>,
    pub estimate: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub eta: Vec<f64>,
    pub plant_norm: Vec<f64>,
}

impl Trajectory {
    pub fn new(sample_dt: f64) -> Self {
        Self {
            sample_dt,
            ..Self::default()
        }
    }

    pub fn push(&mut self, s: Sample) {
        self.t.push(s.t);
        self.theta.push(s.theta);
        self.y.push(s.y);
        self.estimate.push(s.estimate);
        self.grad.push(s.grad);
        self.hess.push(s.hess);
        self.eta.push(s.eta);
        if let Some(norm) = s.plant_norm {
            self.plant_norm.push(norm);
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn column(&self, field: Field) -> &[f64] {
        match field {
            Field::Time => &self.t,
            Field::Theta => &self.theta,
            Field::Y => &self.y,
            Field::Estimate => &self.estimate,
            Field::Grad => &self.grad,
            Field::Hess => &self.hess,
            Field::Eta => &self.eta,
            Field::PlantNorm => &self.plant_norm,
        }
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            t: self.t[i],
            theta: self.theta[i],
            y: self.y[i],
            estimate: self.estimate[i],
            grad: self.grad[i],
            hess: self.hess[i],
            eta: self.eta[i],
            plant_norm: self.plant_norm.get(i).copied(),
        }
    }

    pub fn last(&self) -> Option<Sample> {
        (!self.is_empty()).then(|| self.sample(self.len() - 1))
    }

    /// Maximum of `|column − reference|` over samples with `t >= t_from`.
    pub fn max_deviation_after(&self, field: Field, reference: f64, t_from: f64) -> f64 {
        self.t
            .iter()
            .zip(self.column(field))
            .filter(|(t, _)| **t >= t_from)
            .map(|(_, v)| (v - reference).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the `t,theta,y,estimate,G,Hhat,eta` table with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            let row = [
                self.t[i],
                self.theta[i],
                self.y[i],
                self.estimate[i],
                self.grad[i],
                self.hess[i],
                self.eta[i],
            ];
            let mut first = true;
            for v in row {
                if !first {
                    out.write_all(b",")?;
                }
                first = false;
                write!(out, "{}", format_sig17(v))?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Formats a double with 17 significant digits in scientific notation.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}
