use super::{LinearProgram, LpSolution, LpStatus, FEASIBILITY_TOL, OPTIMALITY_TOL};

const PIVOT_TOL: f64 = 1e-11;
const RATIO_TIE: f64 = 1e-12;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERACY_LIMIT: usize = 40;

/// How an original variable is expressed through nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lower + y`
    Shifted { col: usize, lower: f64 },
    /// `x = upper - y`
    Reflected { col: usize, upper: f64 },
    /// `x = y⁺ - y⁻`
    Split { pos: usize, neg: usize },
}

impl VarMap {
    fn value(&self, y: &[f64]) -> f64 {
        match *self {
            VarMap::Shifted { col, lower } => lower + y[col],
            VarMap::Reflected { col, upper } => upper - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `B⁻¹A`, row-major.
    body: Vec<f64>,
    /// Working copy of the standardized constraint matrix, for refinement.
    original: Vec<f64>,
    rhs: Vec<f64>,
    /// Current values of the basic variables, row by row.
    values: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    upper: Vec<f64>,
    reduced: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.body[r * self.cols + c]
    }

    fn price(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.body[r * self.cols..(r + 1) * self.cols];
                for (d, a) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
        for r in 0..self.rows {
            self.reduced[self.basis[r]] = 0.0;
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            if self.upper[j] <= 0.0 {
                continue;
            }
            let d = self.reduced[j];
            let (score, dir) = match self.state[j] {
                State::AtLower if d < -OPTIMALITY_TOL => (-d, 1.0),
                State::AtUpper if d > OPTIMALITY_TOL => (d, -1.0),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Returns `(step, leaving row, leaving state)`; `None` row means a bound flip.
    fn ratio_test(&self, entering: usize, dir: f64, bland: bool) -> (f64, Option<(usize, State)>) {
        let mut step = self.upper[entering];
        let mut leave: Option<(usize, State)> = None;
        let mut leave_mag = 0.0;
        for r in 0..self.rows {
            let a = self.at(r, entering) * dir;
            let b = self.basis[r];
            let (limit, to) = if a > PIVOT_TOL {
                (self.values[r].max(0.0) / a, State::AtLower)
            } else if a < -PIVOT_TOL && self.upper[b].is_finite() {
                ((self.upper[b] - self.values[r]).max(0.0) / -a, State::AtUpper)
            } else {
                continue;
            };
            let better = match leave {
                _ if limit < step - RATIO_TIE => true,
                _ if limit > step + RATIO_TIE => false,
                // a bound flip of the entering column wins ties
                None => false,
                Some((lr, _)) => {
                    if bland {
                        b < self.basis[lr]
                    } else {
                        a.abs() > leave_mag
                    }
                }
            };
            if better {
                step = limit;
                leave = Some((r, to));
                leave_mag = a.abs();
            }
        }
        (step, leave)
    }

    fn pivot(&mut self, r: usize, entering: usize) {
        let cols = self.cols;
        let p = self.at(r, entering);
        {
            let row = &mut self.body[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[entering] = 1.0;
        }
        let pivot_row: Vec<f64> = self.body[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.body[i * cols + entering];
            if f != 0.0 {
                let row = &mut self.body[i * cols..(i + 1) * cols];
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                row[entering] = 0.0;
            }
        }
        let f = self.reduced[entering];
        if f != 0.0 {
            for (d, pr) in self.reduced.iter_mut().zip(&pivot_row) {
                *d -= f * pr;
            }
            self.reduced[entering] = 0.0;
        }
    }

    fn run_phase(&mut self, cost: &[f64]) -> PhaseOutcome {
        self.price(cost);
        let mut bland = false;
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return PhaseOutcome::IterationLimit;
            }
            let Some((j, dir)) = self.choose_entering(bland) else {
                return PhaseOutcome::Optimal;
            };
            let (step, leave) = self.ratio_test(j, dir, bland);
            if step.is_infinite() {
                return PhaseOutcome::Unbounded;
            }
            self.iterations += 1;
            if step <= RATIO_TIE {
                degenerate += 1;
                if degenerate >= DEGENERACY_LIMIT {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            for r in 0..self.rows {
                let a = self.at(r, j);
                if a != 0.0 {
                    self.values[r] -= a * dir * step;
                }
            }
            match leave {
                None => {
                    self.state[j] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                }
                Some((r, to)) => {
                    let entering_value = if dir > 0.0 { step } else { self.upper[j] - step };
                    let old = self.basis[r];
                    self.state[old] = to;
                    self.pivot(r, j);
                    self.values[r] = entering_value;
                    self.basis[r] = j;
                    self.state[j] = State::Basic;
                }
            }
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut y: Vec<f64> = (0..self.cols)
            .map(|j| match self.state[j] {
                State::AtUpper => self.upper[j],
                _ => 0.0,
            })
            .collect();
        for (r, &b) in self.basis.iter().enumerate() {
            y[b] = self.values[r];
        }
        y
    }

    /// Recomputes basic values from the original matrix by Gaussian
    /// elimination on the basis columns.
    fn refined_column_values(&self) -> Option<Vec<f64>> {
        let m = self.rows;
        if m == 0 {
            return Some(self.column_values());
        }
        let mut y = self.column_values();
        for &b in &self.basis {
            y[b] = 0.0;
        }
        let mut mat = vec![0.0; m * (m + 1)];
        for r in 0..m {
            let orow = &self.original[r * self.cols..(r + 1) * self.cols];
            let mut rhs = self.rhs[r];
            for (j, &yj) in y.iter().enumerate() {
                if yj != 0.0 {
                    rhs -= orow[j] * yj;
                }
            }
            for (k, &b) in self.basis.iter().enumerate() {
                mat[r * (m + 1) + k] = orow[b];
            }
            mat[r * (m + 1) + m] = rhs;
        }
        let w = m + 1;
        for k in 0..m {
            let (piv, mag) =
                (k..m)
                    .map(|r| (r, mat[r * w + k].abs()))
                    .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if mag < 1e-14 {
                return None;
            }
            if piv != k {
                for c in 0..w {
                    mat.swap(k * w + c, piv * w + c);
                }
            }
            let d = mat[k * w + k];
            for r in (k + 1)..m {
                let f = mat[r * w + k] / d;
                if f != 0.0 {
                    for c in k..w {
                        mat[r * w + c] -= f * mat[k * w + c];
                    }
                }
            }
        }
        let mut sol = vec![0.0; m];
        for k in (0..m).rev() {
            let mut acc = mat[k * w + m];
            for c in (k + 1)..m {
                acc -= mat[k * w + c] * sol[c];
            }
            sol[k] = acc / mat[k * w + k];
        }
        for (k, &b) in self.basis.iter().enumerate() {
            y[b] = sol[k].clamp(0.0, self.upper[b]);
        }
        Some(y)
    }
}

pub(super) fn solve(lp: &LinearProgram) -> LpSolution {
    let n = lp.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut col_upper = Vec::new();
    let mut col_cost = Vec::new();
    for j in 0..n {
        let (lo, hi, c) = (lp.lower_bounds[j], lp.upper_bounds[j], lp.objective[j]);
        if lo.is_finite() {
            maps.push(VarMap::Shifted {
                col: col_upper.len(),
                lower: lo,
            });
            col_upper.push(hi - lo);
            col_cost.push(c);
        } else if hi.is_finite() {
            maps.push(VarMap::Reflected {
                col: col_upper.len(),
                upper: hi,
            });
            col_upper.push(f64::INFINITY);
            col_cost.push(-c);
        } else {
            let pos = col_upper.len();
            maps.push(VarMap::Split { pos, neg: pos + 1 });
            col_upper.extend([f64::INFINITY, f64::INFINITY]);
            col_cost.extend([c, -c]);
        }
    }
    let ny = col_upper.len();
    let n_ineq = lp.inequality_lhs.len();
    let m = n_ineq + lp.equality_lhs.len();

    // Standardize every row over the y columns.
    let mut std_rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m);
    for (row, &rhs) in lp
        .inequality_lhs
        .iter()
        .zip(&lp.inequality_rhs)
        .chain(lp.equality_lhs.iter().zip(&lp.equality_rhs))
    {
        let mut coeffs = vec![0.0; ny];
        let mut b = rhs;
        for (a, map) in row.iter().zip(&maps) {
            if *a == 0.0 {
                continue;
            }
            match *map {
                VarMap::Shifted { col, lower } => {
                    coeffs[col] += a;
                    b -= a * lower;
                }
                VarMap::Reflected { col, upper } => {
                    coeffs[col] -= a;
                    b -= a * upper;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        std_rows.push((coeffs, b));
    }

    let needs_artificial: Vec<bool> = std_rows
        .iter()
        .enumerate()
        .map(|(i, (_, b))| i >= n_ineq || *b < 0.0)
        .collect();
    let n_art = needs_artificial.iter().filter(|&&a| a).count();
    let cols = ny + n_ineq + n_art;

    let mut body = vec![0.0; m * cols];
    let mut rhs = vec![0.0; m];
    let mut basis = vec![0; m];
    let mut state = vec![State::AtLower; cols];
    let mut upper = col_upper.clone();
    upper.extend(std::iter::repeat_n(f64::INFINITY, n_ineq + n_art));
    let mut art = ny + n_ineq;
    for (i, (coeffs, b)) in std_rows.iter().enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        let row = &mut body[i * cols..(i + 1) * cols];
        for (dst, a) in row.iter_mut().zip(coeffs) {
            *dst = sign * a;
        }
        if i < n_ineq {
            row[ny + i] = sign;
        }
        rhs[i] = sign * b;
        if needs_artificial[i] {
            row[art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = ny + i;
        }
        state[basis[i]] = State::Basic;
    }

    let mut tab = Tableau {
        rows: m,
        cols,
        original: body.clone(),
        body,
        values: rhs.clone(),
        rhs,
        basis,
        state,
        upper,
        reduced: vec![0.0; cols],
        iterations: 0,
        max_iterations: 50 * (m + cols) + 1000,
    };

    let failure = |status: LpStatus, iterations: usize| LpSolution {
        status,
        value: f64::NAN,
        point: vec![f64::NAN; n],
        iterations,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(ny + n_ineq) {
            *c = 1.0;
        }
        match tab.run_phase(&phase1) {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::IterationLimit | PhaseOutcome::Unbounded => {
                return failure(LpStatus::NumericalFailure, tab.iterations)
            }
        }
        for r in 0..m {
            if tab.basis[r] >= ny + n_ineq && tab.values[r] > FEASIBILITY_TOL * (1.0 + tab.rhs[r].abs()) {
                return failure(LpStatus::Infeasible, tab.iterations);
            }
        }
        for c in (ny + n_ineq)..cols {
            tab.upper[c] = 0.0;
            if tab.state[c] == State::AtUpper {
                tab.state[c] = State::AtLower;
            }
        }
    }

    let mut phase2 = col_cost.clone();
    phase2.resize(cols, 0.0);
    match tab.run_phase(&phase2) {
        PhaseOutcome::Optimal => {}
        PhaseOutcome::Unbounded => return failure(LpStatus::Unbounded, tab.iterations),
        PhaseOutcome::IterationLimit => return failure(LpStatus::NumericalFailure, tab.iterations),
    }

    let to_point = |y: &[f64]| -> Vec<f64> {
        maps.iter()
            .zip(lp.lower_bounds.iter().zip(&lp.upper_bounds))
            .map(|(map, (&lo, &hi))| map.value(y).clamp(lo, hi))
            .collect()
    };
    let mut point = to_point(&tab.column_values());
    let mut violation = lp.scaled_violation(&point);
    if violation > 0.0 {
        if let Some(y) = tab.refined_column_values() {
            let refined = to_point(&y);
            let v = lp.scaled_violation(&refined);
            if v < violation {
                point = refined;
                violation = v;
            }
        }
    }
    if violation > FEASIBILITY_TOL {
        return failure(LpStatus::NumericalFailure, tab.iterations);
    }
    let value = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    LpSolution {
        status: LpStatus::Optimal,
        value,
        point,
        iterations: tab.iterations,
    }
}
