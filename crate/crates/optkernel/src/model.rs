use crate::error::KernelError;

/// Index of a variable inside a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sparse row; duplicate variable entries are summed.
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A maximization LP: `max c'x  s.t.  rows, lower <= x <= upper`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Constant added to the objective value (not to be confused with a variable).
    pub objective_offset: f64,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            objective,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Objective value of a point, offset included.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .variables
                .iter()
                .zip(x)
                .map(|(v, xi)| v.objective * xi)
                .sum::<f64>()
    }

    /// Left-hand side of every row at `x`.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.terms.iter().map(|(v, a)| a * x[v.0]).sum())
            .collect()
    }

    /// Largest bound or row violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, xi) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for (c, lhs) in self.constraints.iter().zip(self.row_activity(x)) {
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || !v.objective.is_finite() {
                return Err(KernelError::Malformed(format!("variable {j} ({}) has NaN data", v.name)));
            }
            if v.lower > v.upper {
                return Err(KernelError::Malformed(format!(
                    "variable {j} ({}) has lower {} > upper {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(KernelError::Malformed(format!("variable {j} ({}) has an empty domain", v.name)));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(KernelError::Malformed(format!("row {i} ({}) has non-finite rhs", c.name)));
            }
            for (v, a) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(KernelError::Malformed(format!(
                        "row {i} ({}) references missing variable {}",
                        c.name, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(KernelError::Malformed(format!("row {i} ({}) has a non-finite coefficient", c.name)));
                }
            }
        }
        Ok(())
    }
}

/// A [`LinearModel`] with integrality restrictions on a subset of variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegerModel {
    pub lp: LinearModel,
    pub integer: Vec<VarId>,
}

impl IntegerModel {
    pub fn new(lp: LinearModel) -> Self {
        Self { lp, integer: Vec::new() }
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        let id = self.lp.add_var(name, 0.0, 1.0, objective);
        self.integer.push(id);
        id
    }

    pub fn mark_integer(&mut self, v: VarId) {
        if !self.integer.contains(&v) {
            self.integer.push(v);
        }
    }

    pub fn is_integer(&self, v: VarId) -> bool {
        self.integer.contains(&v)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        self.lp.validate()?;
        for v in &self.integer {
            let var = self
                .lp
                .variables
                .get(v.0)
                .ok_or_else(|| KernelError::Malformed(format!("integer marker on missing variable {}", v.0)))?;
            for b in [var.lower, var.upper] {
                if b.is_finite() && (b - b.round()).abs() > 1e-9 {
                    return Err(KernelError::Malformed(format!(
                        "integer variable {} has fractional bound {b}",
                        var.name
                    )));
                }
            }
        }
        Ok(())
    }
}
