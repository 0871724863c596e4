use super::graph::{Graph, Var};
use super::params::{param_grads, ParamSet};
use crate::error::{Error, Result};

/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: (String, usize),
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the analytic gradient of every parameter entry against central
/// differences with step `1e-5 · max(1, |θ|)`.
///
/// `loss` returns the loss value and the per-tensor gradients.
pub fn grad_check<F>(params: &ParamSet, loss: F, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&ParamSet) -> Result<(f64, Vec<Vec<f64>>)>,
{
    let (_, analytic) = loss(params)?;
    if analytic.len() != params.len() {
        return Err(Error::Training("gradient count differs from parameter count".into()));
    }
    if analytic.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::Training("non-finite analytic gradient".into()));
    }
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (String::new(), 0),
        checked: 0,
        tolerance,
        passed: true,
    };
    for (t, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let theta = params.tensors[t].data[i];
            let h = 1e-5 * theta.abs().max(1.0);
            probe.tensors[t].data[i] = theta + h;
            let up = loss(&probe)?.0;
            probe.tensors[t].data[i] = theta - h;
            let down = loss(&probe)?.0;
            probe.tensors[t].data[i] = theta;
            let numeric = (up - down) / (2.0 * h);
            if !numeric.is_finite() {
                return Err(Error::Training(format!("non-finite loss near {}[{i}]", params.names[t])));
            }
            let e = relative_error(a, numeric);
            if e > report.max_relative_error || report.checked == 0 {
                report.max_relative_error = e;
                report.worst = (params.names[t].clone(), i);
            }
            report.checked += 1;
        }
    }
    report.passed = report.max_relative_error < tolerance;
    Ok(report)
}

/// Builds a loss graph over bound `params` and returns its value and the
/// per-tensor gradients.
pub fn evaluate<B>(params: &ParamSet, build: B) -> Result<(f64, Vec<Vec<f64>>)>
where
    B: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let p = params.bind(&mut g);
    let loss = build(&mut g, &p);
    let value = g.value(loss).item();
    if !value.is_finite() {
        return Err(Error::Training(format!("non-finite loss {value}")));
    }
    let grads = g.backward(loss);
    Ok((value, param_grads(&grads, &p)))
}

#[cfg(test)]
mod tests {
    use std::rc::Rc;
    use std::sync::Arc;

    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gf2::default_subset;
    use crate::link::{Guard, WaveformMap};
    use crate::nn::{
        glyph_images, Activation, AnalyzeOp, Compensator, ConvStack, ModelConfig, PeriodSpec, ProxyModel, SynthOp,
        Tensor, ToyJscc, ZERO,
    };
    use crate::phy::PhyConfig;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn randomize(p: &mut ParamSet, seed: u64, amp: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in p.tensors.iter_mut() {
            t.data.iter_mut().for_each(|v| *v = rng.random_range(-amp..amp));
        }
    }

    fn check<B: Fn(&mut Graph, &[Var]) -> Var>(p: &ParamSet, tol: f64, build: B) -> GradCheckReport {
        let r = grad_check(p, |q| evaluate(q, &build), tol).unwrap();
        assert!(r.passed, "{r:?}");
        r
    }

    #[test]
    fn linear_layer_mse_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = ParamSet::new();
        p.add("x", rand_tensor(&mut rng, &[4, 5]));
        p.add("w", rand_tensor(&mut rng, &[3, 5]));
        p.add("b", rand_tensor(&mut rng, &[3]));
        // near-optimal target keeps the loss small, so rounding in the
        // central difference stays far below the gradient scale
        let (w, b, x) = (&p.tensors[1].data, &p.tensors[2].data, &p.tensors[0].data);
        let target = Tensor::new(
            &[4, 3],
            (0..12)
                .map(|k| {
                    let (i, o) = (k / 3, k % 3);
                    let y: f64 = b[o] + (0..5).map(|j| w[o * 5 + j] * x[i * 5 + j]).sum::<f64>();
                    y + rng.random_range(-0.05..0.05)
                })
                .collect(),
        )
        .unwrap();
        let r = check(&p, 1e-9, |g, v| {
            let y = g.dense(v[0], v[1], v[2]);
            let t = g.input(target.clone());
            g.mse(y, t)
        });
        assert_eq!(r.checked, 20 + 15 + 3);
    }

    fn tv_of(g: &mut Graph, t: &Tensor) -> Var {
        g.input(t.clone())
    }

    #[test]
    fn clamp_values() {
        let mut g = Graph::new();
        let x = g.input(Tensor::vector(vec![-2.0, 0.5, 0.3, -0.05]));
        let y = g.clamp(x, vec![1.0, 0.0].into());
        assert_eq!(g.value(y).data, vec![-1.0, 0.0, 0.3, 0.0]);
    }

    #[test]
    fn elementwise_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = ParamSet::new();
        p.add("a", rand_tensor(&mut rng, &[6]));
        p.add("b", rand_tensor(&mut rng, &[6]));
        let t = rand_tensor(&mut rng, &[6]);
        for act in [Activation::Tanh, Activation::Relu] {
            check(&p, 1e-6, |g, v| {
                let s = g.add(v[0], v[1]);
                let d = g.sub(s, v[1]);
                let m = g.mul(d, v[1]);
                let c = g.scale(m, -1.7);
                let a = g.activation(c, act);
                let k = g.clamp(a, vec![0.4, 0.1].into());
                let out = g.concat(&[a, k]);
                let (t0, t1) = (tv_of(g, &t), tv_of(g, &t));
                let t2 = g.concat(&[t0, t1]);
                g.mse(out, t2)
            });
        }
    }

    #[test]
    fn conv_gather_concat_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = ParamSet::new();
        p.add("x", rand_tensor(&mut rng, &[2, 4, 5]));
        p.add("w", rand_tensor(&mut rng, &[3, 2, 3, 5]));
        p.add("b", rand_tensor(&mut rng, &[3]));
        p.add("y", rand_tensor(&mut rng, &[7]));
        let index: Rc<[usize]> = (0..18).map(|i| if i % 5 == 0 { ZERO } else { (i * 7) % 60 }).collect::<Vec<_>>().into();
        let t = rand_tensor(&mut rng, &[4, 8]);
        check(&p, 1e-6, |g, v| {
            let c = g.conv2d(v[0], v[1], v[2]);
            let gth = g.gather(c, index.clone(), &[18]);
            let cat = g.concat(&[gth, v[3], v[3]]);
            let r = g.reshape(cat, &[4, 8]);
            let n = g.power_normalize(r, 8);
            let tv = g.input(t.clone());
            g.mse(n, tv)
        });
    }

    #[test]
    fn waveform_linear_ops() {
        let cfg = PhyConfig::default();
        let map = WaveformMap::new(&cfg, &default_subset(&cfg)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = ParamSet::new();
        p.add("s", rand_tensor(&mut rng, &[40]));
        let synth = Arc::new(SynthOp::new(map.clone(), 20, Guard::Cyclic));
        let analyze = Arc::new(AnalyzeOp::new(map, 20));
        let t = rand_tensor(&mut rng, &[40]);
        check(&p, 1e-6, |g, v| {
            let w = g.linear(v[0], synth.clone());
            let sq = g.mul(w, w);
            let s = g.linear(sq, analyze.clone());
            let tv = g.input(t.clone());
            g.mse(s, tv)
        });
    }

    #[test]
    fn conv_stack() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = ParamSet::new();
        let stack = ConvStack::new(&mut p, "s", &[2, 4, 2], (3, 3), Activation::Tanh, false, &mut rng);
        let x = rand_tensor(&mut rng, &[2, 5, 6]);
        let t = rand_tensor(&mut rng, &[2, 5, 6]);
        check(&p, 1e-4, |g, v| {
            let xv = g.input(x.clone());
            let y = stack.forward(g, v, xv);
            let tv = g.input(t.clone());
            g.mse(y, tv)
        });
    }

    fn small_map() -> WaveformMap {
        let cfg = PhyConfig::default();
        WaveformMap::new(&cfg, &default_subset(&cfg)).unwrap()
    }

    fn wave(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..2 * n).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    #[test]
    fn compensator_model() {
        for residual in [true, false] {
            let cfg = ModelConfig {
                comp_residual: residual,
                ..ModelConfig::default()
            };
            let mut c = Compensator::new(&cfg, PeriodSpec::new(80, 2).unwrap(), 6);
            randomize(&mut c.params, 6, 0.4);
            let n = 100;
            let x = Tensor::new(&[n, 2], wave(n, 1)).unwrap();
            let t = Tensor::new(&[n, 2], wave(n, 2)).unwrap();
            let mask: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i % 80 >= 16))).collect();
            check(&c.params, 1e-4, |g, v| {
                let xv = g.input(x.clone());
                let y = c.forward(g, v, xv, &mask);
                let tv = g.input(t.clone());
                g.mse(y, tv)
            });
        }
    }

    #[test]
    fn proxy_model_including_input() {
        let mut proxy = ProxyModel::new(&ModelConfig::default(), small_map(), crate::phy::Modulation::Qam64, 7);
        randomize(&mut proxy.params, 7, 0.3);
        let n = 90;
        let noise = proxy.sample_noise(n, 5.0, 1);
        let t = Tensor::new(&[n, 2], wave(n, 3)).unwrap();
        let mut all = proxy.params.clone();
        all.add("input", Tensor::new(&[n, 2], wave(n, 4)).unwrap());
        let last = all.len() - 1;
        check(&all, 1e-4, |g, v| {
            let y = proxy.forward(g, &v[..last], v[last], Some(&noise));
            let tv = g.input(t.clone());
            g.mse(y, tv)
        });
    }

    #[test]
    fn toy_jscc_round_trip() {
        for hidden in [vec![], vec![16]] {
            let cfg = ModelConfig {
                jscc_hidden: hidden,
                ..ModelConfig::default()
            };
            let m = ToyJscc::new(&cfg, 8);
            let imgs = m.batch(&glyph_images(3, 8, 8)).unwrap();
            check(&m.params, 1e-4, |g, v| {
                let x = g.input(imgs.clone());
                let z = m.encode_graph(g, v, x);
                let y = m.decode_graph(g, v, z);
                g.mse(y, x)
            });
        }
    }

    #[test]
    fn corrupted_gradient_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = ParamSet::new();
        p.add("w", rand_tensor(&mut rng, &[3, 4]));
        p.add("b", rand_tensor(&mut rng, &[3]));
        let x = rand_tensor(&mut rng, &[2, 4]);
        let build = |g: &mut Graph, v: &[Var]| {
            let xv = g.input(x.clone());
            let y = g.dense(xv, v[0], v[1]);
            g.mse(y, y)
        };
        let negated = |q: &ParamSet| {
            evaluate(q, |g, v| {
                let xv = g.input(x.clone());
                let y = g.dense(xv, v[0], v[1]);
                let t = g.input(Tensor::zeros(&[2, 3]));
                g.mse(y, t)
            })
            .map(|(l, gr)| (l, gr.into_iter().map(|t| t.into_iter().map(|v| -v).collect()).collect()))
        };
        assert!(!grad_check(&p, negated, 1e-4).unwrap().passed);
        // a zero loss has zero gradients that agree
        assert!(grad_check(&p, |q| evaluate(q, build), 1e-4).unwrap().passed);
        let nan = |q: &ParamSet| evaluate(q, build).map(|(l, _)| (l, vec![vec![f64::NAN; 12], vec![0.0; 3]]));
        assert!(grad_check(&p, nan, 1e-4).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-3).abs() < 1e-12);
        let _ = Complex64::new(0.0, 0.0);
    }
}
