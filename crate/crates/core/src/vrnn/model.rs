use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ElboBreakdown, ElboStep, GaussianParams, HistorySummary, ModelError, SIGMA_FLOOR};
use crate::compute::{Tape, Tensor, Var};
use crate::fourhot::{EncodedTrack, FourHotSpec, FourHotVector};

const LSTM_INIT_RANGE: f64 = 0.08;

/// Network sizes. The latent size must equal the recurrent state size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// LSTM state size H (100 for cargo/tanker traffic, 120 for all vessel types).
    pub hidden: usize,
    /// Latent size Z.
    pub latent: usize,
    /// Hidden layer width of the prior, posterior and emission networks.
    pub subnet_hidden: usize,
}

impl ModelConfig {
    pub fn new(hidden: usize) -> Self {
        ModelConfig { hidden, latent: hidden, subnet_hidden: 100 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 || self.subnet_hidden == 0 {
            return Err(ModelError::Config("sizes must be positive".into()));
        }
        if self.latent != self.hidden {
            return Err(ModelError::Config(format!(
                "latent size {} must equal hidden size {}",
                self.latent, self.hidden
            )));
        }
        Ok(())
    }
}

/// Parameter tensors, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamId {
    /// `[D, 4H]`, input gates from the previous four-hot vector.
    LstmWx,
    /// `[Z + H, 4H]`, gates from the previous latent and state.
    LstmWzh,
    LstmB,
    PriorW1,
    PriorB1,
    /// `[M, 2Z]`: mean then pre-softplus std.
    PriorW2,
    PriorB2,
    PostWx,
    PostWh,
    PostB1,
    PostW2,
    PostB2,
    EmitW1,
    EmitB1,
    EmitW2,
    EmitB2,
}

impl ParamId {
    pub const ALL: [ParamId; 16] = [
        ParamId::LstmWx,
        ParamId::LstmWzh,
        ParamId::LstmB,
        ParamId::PriorW1,
        ParamId::PriorB1,
        ParamId::PriorW2,
        ParamId::PriorB2,
        ParamId::PostWx,
        ParamId::PostWh,
        ParamId::PostB1,
        ParamId::PostW2,
        ParamId::PostB2,
        ParamId::EmitW1,
        ParamId::EmitB1,
        ParamId::EmitW2,
        ParamId::EmitB2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::LstmWx => "lstm.w_x",
            ParamId::LstmWzh => "lstm.w_zh",
            ParamId::LstmB => "lstm.b",
            ParamId::PriorW1 => "prior.w1",
            ParamId::PriorB1 => "prior.b1",
            ParamId::PriorW2 => "prior.w2",
            ParamId::PriorB2 => "prior.b2",
            ParamId::PostWx => "posterior.w_x",
            ParamId::PostWh => "posterior.w_h",
            ParamId::PostB1 => "posterior.b1",
            ParamId::PostW2 => "posterior.w2",
            ParamId::PostB2 => "posterior.b2",
            ParamId::EmitW1 => "emission.w1",
            ParamId::EmitB1 => "emission.b1",
            ParamId::EmitW2 => "emission.w2",
            ParamId::EmitB2 => "emission.b2",
        }
    }

    pub fn from_name(name: &str) -> Option<ParamId> {
        Self::ALL.iter().copied().find(|p| p.name() == name)
    }

    fn idx(self) -> usize {
        self as usize
    }
}

/// Expected shape of every parameter for the given sizes.
pub(crate) fn param_shapes(cfg: &ModelConfig, dim: usize) -> Vec<Vec<usize>> {
    let (h, z, m, d) = (cfg.hidden, cfg.latent, cfg.subnet_hidden, dim);
    ParamId::ALL
        .iter()
        .map(|p| match p {
            ParamId::LstmWx => vec![d, 4 * h],
            ParamId::LstmWzh => vec![z + h, 4 * h],
            ParamId::LstmB => vec![4 * h],
            ParamId::PriorW1 => vec![h, m],
            ParamId::PriorB1 => vec![m],
            ParamId::PriorW2 => vec![m, 2 * z],
            ParamId::PriorB2 => vec![2 * z],
            ParamId::PostWx => vec![d, m],
            ParamId::PostWh => vec![h, m],
            ParamId::PostB1 => vec![m],
            ParamId::PostW2 => vec![m, 2 * z],
            ParamId::PostB2 => vec![2 * z],
            ParamId::EmitW1 => vec![z + h, m],
            ParamId::EmitB1 => vec![m],
            ParamId::EmitW2 => vec![m, d],
            ParamId::EmitB2 => vec![d],
        })
        .collect()
}

/// Recurrent state `(h, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }
}

/// All parameters of the track model plus the encoding they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct VrnnModel {
    pub spec: FourHotSpec,
    pub config: ModelConfig,
    pub(crate) params: Vec<Tensor>,
    pub training_seed: u64,
    pub history: Option<HistorySummary>,
}

/// Tape handles of the model parameters plus the forward building blocks.
pub(crate) struct Graph<'a> {
    pub tape: &'a mut Tape,
    pub p: Vec<Var>,
    pub spec: &'a FourHotSpec,
    pub cfg: ModelConfig,
}

pub(crate) struct StepNodes {
    pub reconstruction: Var,
    pub kl: Var,
    pub elbo: Var,
}

impl Graph<'_> {
    fn w(&self, id: ParamId) -> Var {
        self.p[id.idx()]
    }

    pub fn lstm_step(
        &mut self,
        x_prev: Option<&FourHotVector>,
        z_prev: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var), ModelError> {
        let hs = self.cfg.hidden;
        let rows: Vec<usize> = x_prev.map(|x| x.active(self.spec).to_vec()).unwrap_or_default();
        let gx = self.tape.gather_rows(self.w(ParamId::LstmWx), &rows)?;
        let zh = self.tape.concat(&[z_prev, h])?;
        let gzh = self.tape.matmul(zh, self.w(ParamId::LstmWzh))?;
        let gates = self.tape.add(gx, gzh)?;
        let gates = self.tape.add(gates, self.w(ParamId::LstmB))?;
        let i = self.tape.slice(gates, 0, hs)?;
        let f = self.tape.slice(gates, hs, hs)?;
        let g = self.tape.slice(gates, 2 * hs, hs)?;
        let o = self.tape.slice(gates, 3 * hs, hs)?;
        let i = self.tape.sigmoid(i);
        let f = self.tape.sigmoid(f);
        let g = self.tape.tanh(g);
        let o = self.tape.sigmoid(o);
        let fc = self.tape.mul(f, c)?;
        let ig = self.tape.mul(i, g)?;
        let c_new = self.tape.add(fc, ig)?;
        let tc = self.tape.tanh(c_new);
        let h_new = self.tape.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    /// `tanh(pre) -> [mean, softplus(.) + floor]`.
    fn gaussian_head(&mut self, pre: Var, w2: ParamId, b2: ParamId) -> Result<(Var, Var), ModelError> {
        let z = self.cfg.latent;
        let hid = self.tape.tanh(pre);
        let out = self.tape.matmul(hid, self.w(w2))?;
        let out = self.tape.add(out, self.w(b2))?;
        let mean = self.tape.slice(out, 0, z)?;
        let raw = self.tape.slice(out, z, z)?;
        let sp = self.tape.softplus(raw);
        let std = self.tape.add_scalar(sp, SIGMA_FLOOR);
        Ok((mean, std))
    }

    pub fn prior(&mut self, h: Var) -> Result<(Var, Var), ModelError> {
        let pre = self.tape.matmul(h, self.w(ParamId::PriorW1))?;
        let pre = self.tape.add(pre, self.w(ParamId::PriorB1))?;
        self.gaussian_head(pre, ParamId::PriorW2, ParamId::PriorB2)
    }

    pub fn posterior(&mut self, x: &FourHotVector, h: Var) -> Result<(Var, Var), ModelError> {
        let gx = self.tape.gather_rows(self.w(ParamId::PostWx), &x.active(self.spec))?;
        let gh = self.tape.matmul(h, self.w(ParamId::PostWh))?;
        let pre = self.tape.add(gx, gh)?;
        let pre = self.tape.add(pre, self.w(ParamId::PostB1))?;
        self.gaussian_head(pre, ParamId::PostW2, ParamId::PostB2)
    }

    pub fn emission_logits(&mut self, z: Var, h: Var) -> Result<Var, ModelError> {
        let zh = self.tape.concat(&[z, h])?;
        let pre = self.tape.matmul(zh, self.w(ParamId::EmitW1))?;
        let pre = self.tape.add(pre, self.w(ParamId::EmitB1))?;
        let hid = self.tape.tanh(pre);
        let out = self.tape.matmul(hid, self.w(ParamId::EmitW2))?;
        Ok(self.tape.add(out, self.w(ParamId::EmitB2))?)
    }

    pub fn kl(&mut self, mq: Var, sq: Var, mp: Var, sp: Var) -> Result<Var, ModelError> {
        let log_sp = self.tape.log(sp);
        let log_sq = self.tape.log(sq);
        let log_ratio = self.tape.sub(log_sp, log_sq)?;
        let vq = self.tape.mul(sq, sq)?;
        let d = self.tape.sub(mq, mp)?;
        let d2 = self.tape.mul(d, d)?;
        let num = self.tape.add(vq, d2)?;
        let vp = self.tape.mul(sp, sp)?;
        let den = self.tape.scale(vp, 2.0);
        let frac = self.tape.div(num, den)?;
        let terms = self.tape.add(log_ratio, frac)?;
        let terms = self.tape.add_scalar(terms, -0.5);
        Ok(self.tape.sum(terms))
    }

    /// Builds the per-step bounds of `track`. Noise is drawn from `rng` in a
    /// fixed order: for each step, `samples` vectors of Z standard normals.
    pub fn elbo(
        &mut self,
        track: &EncodedTrack,
        samples: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Var, Vec<StepNodes>), ModelError> {
        let (hs, zs) = (self.cfg.hidden, self.cfg.latent);
        let mut h = self.tape.constant(Tensor::zeros(&[hs]));
        let mut c = self.tape.constant(Tensor::zeros(&[hs]));
        let mut steps = Vec::with_capacity(track.len());
        let mut total: Option<Var> = None;
        for (t, x) in track.steps.iter().enumerate() {
            let (mp, sp) = self.prior(h)?;
            let (mq, sq) = self.posterior(x, h)?;
            let active = x.active(self.spec);
            let mut recon: Option<Var> = None;
            let mut z_first = None;
            for _ in 0..samples {
                let eta: Vec<f64> = (0..zs).map(|_| rng.sample(StandardNormal)).collect();
                let eta = self.tape.constant(Tensor::vector(eta));
                let noise = self.tape.mul(sq, eta)?;
                let z = self.tape.add(mq, noise)?;
                z_first.get_or_insert(z);
                let logits = self.emission_logits(z, h)?;
                let ll = self.tape.bernoulli_log_likelihood(logits, &active)?;
                recon = Some(match recon {
                    Some(acc) => self.tape.add(acc, ll)?,
                    None => ll,
                });
            }
            let recon = self.tape.scale(recon.expect("samples >= 1"), 1.0 / samples as f64);
            let kl = self.kl(mq, sq, mp, sp)?;
            let elbo = self.tape.sub(recon, kl)?;
            let finite = [recon, kl].iter().all(|v| self.tape.value(*v).is_finite());
            if !finite {
                return Err(ModelError::NonFiniteValue { timestep: t });
            }
            total = Some(match total {
                Some(acc) => self.tape.add(acc, elbo)?,
                None => elbo,
            });
            steps.push(StepNodes { reconstruction: recon, kl, elbo });
            if t + 1 < track.len() {
                let (h2, c2) = self.lstm_step(Some(x), z_first.expect("samples >= 1"), h, c)?;
                h = h2;
                c = c2;
            }
        }
        Ok((total.expect("non-empty track"), steps))
    }
}

pub(crate) fn breakdown(tape: &Tape, total: Var, steps: &[StepNodes]) -> ElboBreakdown {
    let item = |v: Var| tape.value(v).item().expect("scalar node");
    ElboBreakdown {
        steps: steps
            .iter()
            .map(|s| ElboStep { reconstruction: item(s.reconstruction), kl: item(s.kl), elbo: item(s.elbo) })
            .collect(),
        total: item(total),
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl VrnnModel {
    /// Fresh model. LSTM weights are uniform in [-0.08, 0.08], dense weights
    /// are normal with variance 1/fan-in, dense biases are zero except the
    /// emission output bias, which starts at each block's uniform-bin logit.
    pub fn new(spec: FourHotSpec, config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        spec.validate().map_err(|e| ModelError::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = param_shapes(&config, spec.dim());
        let mut params = Vec::with_capacity(shapes.len());
        for (id, shape) in ParamId::ALL.iter().zip(&shapes) {
            let n: usize = shape.iter().product();
            let data: Vec<f64> = match id {
                ParamId::LstmWx | ParamId::LstmWzh | ParamId::LstmB => {
                    (0..n).map(|_| rng.random_range(-LSTM_INIT_RANGE..=LSTM_INIT_RANGE)).collect()
                }
                ParamId::EmitB2 => {
                    let mut b = Vec::with_capacity(n);
                    for size in spec.block_sizes() {
                        b.extend(std::iter::repeat_n(logit(1.0 / size.max(2) as f64), size));
                    }
                    b
                }
                _ if shape.len() == 1 => vec![0.0; n],
                _ => {
                    let normal = Normal::new(0.0, 1.0 / (shape[0] as f64).sqrt()).expect("positive std");
                    (0..n).map(|_| rng.sample(normal)).collect()
                }
            };
            params.push(Tensor::new(shape.clone(), data)?);
        }
        Ok(VrnnModel { spec, config, params, training_seed: seed, history: None })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn param(&self, id: ParamId) -> &Tensor {
        &self.params[id.idx()]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.idx()]
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub(crate) fn graph<'a>(&'a self, tape: &'a mut Tape, params: &[Var]) -> Graph<'a> {
        Graph { tape, p: params.to_vec(), spec: &self.spec, cfg: self.config }
    }

    fn check_track(&self, track: &EncodedTrack) -> Result<(), ModelError> {
        if track.spec != self.spec {
            return Err(ModelError::SpecMismatch);
        }
        if track.is_empty() {
            return Err(ModelError::Domain("empty track".into()));
        }
        Ok(())
    }

    /// One recurrence step on concrete values.
    pub fn lstm_step(
        &self,
        x_prev: Option<&FourHotVector>,
        z_prev: &[f64],
        state: &LstmState,
    ) -> Result<LstmState, ModelError> {
        let (hs, zs) = (self.config.hidden, self.config.latent);
        if z_prev.len() != zs || state.h.len() != hs || state.c.len() != hs {
            return Err(crate::compute::ComputeError::Shape(format!(
                "lstm_step: z {} h {} c {} for Z={zs} H={hs}",
                z_prev.len(),
                state.h.len(),
                state.c.len()
            ))
            .into());
        }
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let z = tape.constant(Tensor::vector(z_prev.to_vec()));
        let h = tape.constant(Tensor::vector(state.h.clone()));
        let c = tape.constant(Tensor::vector(state.c.clone()));
        let mut g = self.graph(&mut tape, &vars);
        let (h2, c2) = g.lstm_step(x_prev, z, h, c)?;
        Ok(LstmState { h: tape.value(h2).data().to_vec(), c: tape.value(c2).data().to_vec() })
    }

    /// Prior and posterior at one step, for inspection.
    pub fn step_distributions(
        &self,
        x: &FourHotVector,
        h: &[f64],
    ) -> Result<(GaussianParams, GaussianParams), ModelError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let hv = tape.constant(Tensor::vector(h.to_vec()));
        let mut g = self.graph(&mut tape, &vars);
        let (mp, sp) = g.prior(hv)?;
        let (mq, sq) = g.posterior(x, hv)?;
        let get = |v: Var| tape.value(v).data().to_vec();
        Ok((GaussianParams { mean: get(mq), std: get(sq) }, GaussianParams { mean: get(mp), std: get(sp) }))
    }

    /// Per-step evidence lower bound with `samples` reparameterized draws per step.
    pub fn elbo(&self, track: &EncodedTrack, samples: usize, seed: u64) -> Result<ElboBreakdown, ModelError> {
        self.check_track(track)?;
        if samples == 0 {
            return Err(ModelError::Domain("at least one Monte Carlo sample is required".into()));
        }
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (total, steps) = self.graph(&mut tape, &vars).elbo(track, samples, &mut rng)?;
        Ok(breakdown(&tape, total, &steps))
    }

    /// Bound and its gradient with respect to every parameter (in [`ParamId::ALL`] order).
    pub fn elbo_gradient(
        &self,
        track: &EncodedTrack,
        samples: usize,
        seed: u64,
    ) -> Result<(ElboBreakdown, Vec<Tensor>), ModelError> {
        self.check_track(track)?;
        if samples == 0 {
            return Err(ModelError::Domain("at least one Monte Carlo sample is required".into()));
        }
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.param(p.clone())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (total, steps) = self.graph(&mut tape, &vars).elbo(track, samples, &mut rng)?;
        let bd = breakdown(&tape, total, &steps);
        let grads = tape.backward(total)?.collect(&tape, &vars);
        Ok((bd, grads))
    }

    /// Records the total bound of `track` on `tape`, with `params` standing in
    /// for the model parameters (in [`ParamId::ALL`] order).
    pub fn elbo_on_tape(
        &self,
        tape: &mut Tape,
        params: &[Var],
        track: &EncodedTrack,
        samples: usize,
        seed: u64,
    ) -> Result<Var, ModelError> {
        self.check_track(track)?;
        if params.len() != self.params.len() || samples == 0 {
            return Err(ModelError::Domain("need one handle per parameter and at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.graph(tape, params).elbo(track, samples, &mut rng)?.0)
    }

    /// Per-message scores: the per-step bound averaged over `samples` draws.
    pub fn score_track(&self, track: &EncodedTrack, samples: usize, seed: u64) -> Result<Vec<f64>, ModelError> {
        Ok(self.elbo(track, samples, seed)?.scores())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::Roi;

    pub(crate) fn tiny_spec() -> FourHotSpec {
        // 10 + 10 + 10 + 10 = 40
        FourHotSpec {
            roi: Roi { lat_min: 48.0, lat_max: 48.1, lon_min: -5.0, lon_max: -4.9 },
            res_lat: 0.01,
            res_lon: 0.01,
            res_sog: 1.0,
            res_cog: 36.0,
            sog_max: 10.0,
        }
    }

    fn track(spec: &FourHotSpec, bins: &[[usize; 4]]) -> EncodedTrack {
        EncodedTrack {
            track_id: "t".into(),
            mmsi: 1,
            t0: 0,
            dt: 600,
            spec: spec.clone(),
            steps: bins.iter().map(|b| FourHotVector { bins: *b }).collect(),
        }
    }

    fn tiny_model() -> VrnnModel {
        VrnnModel::new(tiny_spec(), ModelConfig { hidden: 8, latent: 8, subnet_hidden: 8 }, 3).unwrap()
    }

    #[test]
    fn shapes_and_count() {
        let m = tiny_model();
        assert_eq!(m.dim(), 40);
        assert_eq!(m.param(ParamId::LstmWx).shape(), &[40, 32]);
        assert_eq!(m.param(ParamId::EmitW2).shape(), &[8, 40]);
        assert_eq!(ParamId::from_name("emission.b2"), Some(ParamId::EmitB2));
    }

    #[test]
    fn latent_must_match_hidden() {
        let cfg = ModelConfig { hidden: 8, latent: 4, subnet_hidden: 8 };
        assert!(matches!(VrnnModel::new(tiny_spec(), cfg, 0), Err(ModelError::Config(_))));
    }

    #[test]
    fn zero_weights_keep_state_at_zero() {
        let mut m = tiny_model();
        for id in [ParamId::LstmWx, ParamId::LstmWzh, ParamId::LstmB] {
            m.param_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let s = m.lstm_step(Some(&FourHotVector { bins: [1, 2, 3, 4] }), &[0.5; 8], &LstmState::zeros(8)).unwrap();
        assert!(s.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_step_is_deterministic_and_checks_shapes() {
        let m = tiny_model();
        let x = FourHotVector { bins: [1, 2, 3, 4] };
        let st = LstmState { h: vec![0.1; 8], c: vec![-0.2; 8] };
        let a = m.lstm_step(Some(&x), &[0.3; 8], &st).unwrap();
        let b = m.lstm_step(Some(&x), &[0.3; 8], &st).unwrap();
        assert_eq!(a, b);
        assert!(m.lstm_step(Some(&x), &[0.3; 5], &st).is_err());
    }

    #[test]
    fn bound_signs_and_determinism() {
        let m = tiny_model();
        let t = track(&m.spec, &[[0, 0, 0, 0], [1, 1, 5, 2], [2, 3, 5, 2], [9, 9, 9, 9]]);
        let a = m.elbo(&t, 3, 11).unwrap();
        assert!(a.steps.iter().all(|s| s.kl >= 0.0 && s.elbo <= 0.0));
        assert_eq!(a, m.elbo(&t, 3, 11).unwrap());
        let sum: f64 = a.steps.iter().map(|s| s.elbo).sum();
        assert!((sum - a.total).abs() < 1e-9);
    }

    #[test]
    fn forced_half_emission() {
        let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
        let mut m = VrnnModel::new(spec.clone(), ModelConfig { hidden: 4, latent: 4, subnet_hidden: 4 }, 0).unwrap();
        m.param_mut(ParamId::EmitW2).data_mut().iter_mut().for_each(|v| *v = 0.0);
        m.param_mut(ParamId::EmitB2).data_mut().iter_mut().for_each(|v| *v = 0.0);
        let t = track(&spec, &[[50, 158, 12, 49], [51, 158, 12, 49]]);
        let bd = m.elbo(&t, 2, 0).unwrap();
        for s in &bd.steps {
            assert!((s.reconstruction - 602.0 * 0.5f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn spec_mismatch_and_zero_samples() {
        let m = tiny_model();
        let mut other = tiny_spec();
        other.res_cog = 30.0;
        let t = track(&other, &[[0, 0, 0, 0]]);
        assert!(matches!(m.score_track(&t, 1, 0), Err(ModelError::SpecMismatch)));
        let t = track(&m.spec, &[[0, 0, 0, 0]]);
        assert!(matches!(m.score_track(&t, 0, 0), Err(ModelError::Domain(_))));
    }

    #[test]
    fn collapsed_posterior_is_seed_independent() {
        let mut m = tiny_model();
        let z = m.config.latent;
        for (i, v) in m.param_mut(ParamId::PostB2).data_mut().iter_mut().enumerate() {
            if i >= z {
                *v = -200.0;
            }
        }
        let w2 = m.param_mut(ParamId::PostW2);
        let cols = 2 * z;
        for (i, v) in w2.data_mut().iter_mut().enumerate() {
            if i % cols >= z {
                *v = 0.0;
            }
        }
        let t = track(&m.spec, &[[0, 1, 2, 3], [1, 1, 2, 3], [2, 2, 2, 3]]);
        let a = m.elbo(&t, 1, 1).unwrap();
        let b = m.elbo(&t, 1, 99).unwrap();
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert!((x.elbo - y.elbo).abs() <= 1e-6 * x.elbo.abs().max(1.0), "{} {}", x.elbo, y.elbo);
        }
    }
}
