use detproc::kernels::{BesselKernel, Kernel, SineKernel, SqrtMappedKernel};
use detproc::sampler::discretize;
use std::sync::Arc;

fn main() {
    let cases: Vec<(String, Arc<dyn Kernel>, (f64, f64), usize)> = vec![
        (
            "bessel0 t(0,40) N512".into(),
            Arc::new(SqrtMappedKernel::new(Arc::new(BesselKernel::new(0.0).unwrap())).unwrap()),
            (0.0, 40.0),
            512,
        ),
        (
            "bessel0 t(0.25,40) N512".into(),
            Arc::new(SqrtMappedKernel::new(Arc::new(BesselKernel::new(0.0).unwrap())).unwrap()),
            (0.25, 40.0),
            512,
        ),
        (
            "bessel0 t(0.25,40) N1024".into(),
            Arc::new(SqrtMappedKernel::new(Arc::new(BesselKernel::new(0.0).unwrap())).unwrap()),
            (0.25, 40.0),
            1024,
        ),
        (
            "bessel05 t(0,72) N1024".into(),
            Arc::new(SqrtMappedKernel::new(Arc::new(BesselKernel::new(0.5).unwrap())).unwrap()),
            (0.0, 72.0),
            1024,
        ),
        (
            "bessel1 t(0,72) N1024".into(),
            Arc::new(SqrtMappedKernel::new(Arc::new(BesselKernel::new(1.0).unwrap())).unwrap()),
            (0.0, 72.0),
            1024,
        ),
        (
            "sine (-20,20) N832".into(),
            Arc::new(SineKernel),
            (-20.0, 20.0),
            832,
        ),
        (
            "sine (-24,24) N1024".into(),
            Arc::new(SineKernel),
            (-24.0, 24.0),
            1024,
        ),
        (
            "sine (-32,32) N1024".into(),
            Arc::new(SineKernel),
            (-32.0, 32.0),
            1024,
        ),
    ];
    for (label, k, w, n) in cases {
        match discretize(k.as_ref(), w, n) {
            Ok(dk) => println!(
                "{label}: clamp below {:.2e} above {:.2e}, trace {:.3}, kept {}",
                dk.clamp_report().max_below,
                dk.clamp_report().max_above,
                dk.trace(),
                dk.eigenvalues().len()
            ),
            Err(e) => println!("{label}: ERR {e}"),
        }
    }
}
