use num_complex::Complex64;

/// Dense pure state over `n` qubits; qubit `q` is bit `q` of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn reset(&mut self) {
        self.amps.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        self.amps[0] = Complex64::new(1.0, 0.0);
    }

    #[inline]
    fn for_pairs(&mut self, q: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = 1usize << q;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            let (lo, hi) = self.amps[base..base + 2 * stride].split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
            base += 2 * stride;
        }
    }

    /// RY with precomputed `(cos(t/2), sin(t/2))`.
    pub fn apply_ry_cs(&mut self, q: usize, c: f64, s: f64) {
        self.for_pairs(q, |a, b| {
            let (x, y) = (*a, *b);
            *a = x * c - y * s;
            *b = x * s + y * c;
        });
    }

    pub fn apply_ry(&mut self, q: usize, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        self.apply_ry_cs(q, c, s);
    }

    /// RZ with precomputed phase `e^{-i t/2}`.
    pub fn apply_rz_phase(&mut self, q: usize, phase: Complex64) {
        let conj = phase.conj();
        self.for_pairs(q, |a, b| {
            *a *= phase;
            *b *= conj;
        });
    }

    pub fn apply_rz(&mut self, q: usize, theta: f64) {
        self.apply_rz_phase(q, Complex64::from_polar(1.0, -0.5 * theta));
    }

    pub fn apply_x(&mut self, q: usize) {
        self.for_pairs(q, std::mem::swap);
    }

    pub fn apply_y(&mut self, q: usize) {
        let i = Complex64::new(0.0, 1.0);
        self.for_pairs(q, |a, b| {
            let (x, y) = (*a, *b);
            *a = -i * y;
            *b = i * x;
        });
    }

    pub fn apply_z(&mut self, q: usize) {
        self.for_pairs(q, |_, b| *b = -*b);
    }

    /// Pauli by index: 0 = I, 1 = X, 2 = Y, 3 = Z.
    pub fn apply_pauli(&mut self, q: usize, pauli: u8) {
        match pauli {
            1 => self.apply_x(q),
            2 => self.apply_y(q),
            3 => self.apply_z(q),
            _ => {}
        }
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}
