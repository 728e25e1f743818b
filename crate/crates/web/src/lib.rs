//! WebAssembly bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(e: podgeq::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Velocity samples on an `n × n` grid, interleaved `v1, v2`.
#[wasm_bindgen]
pub fn velocity_field(amplitude: f64, theta: f64, time_periodic: bool, t: f64, n: usize) -> Result<Vec<f64>, JsError> {
    demo::flow(amplitude, theta, time_periodic)
        .and_then(|f| demo::velocity_field(f, t, n))
        .map_err(js)
}

#[wasm_bindgen]
pub struct FrontSim(demo::Front);

#[wasm_bindgen]
impl FrontSim {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, d: f64, amplitude: f64, theta: f64, time_periodic: bool) -> Result<FrontSim, JsError> {
        let spec = demo::flow(amplitude, theta, time_periodic).map_err(js)?;
        demo::Front::new(n, d, spec).map(FrontSim).map_err(js)
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), JsError> {
        self.0.advance(steps).map_err(js)
    }

    pub fn time(&self) -> f64 {
        self.0.time()
    }

    pub fn level_set(&self) -> Vec<f64> {
        self.0.level_set()
    }

    pub fn flame_speed(&self) -> f64 {
        self.0.flame_speed()
    }
}

#[wasm_bindgen]
pub struct PodDemo(demo::PodSummary);

#[wasm_bindgen]
impl PodDemo {
    pub fn spectrum(&self) -> Vec<f64> {
        self.0.spectrum.clone()
    }

    pub fn rank(&self) -> usize {
        self.0.rank
    }

    pub fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    pub fn fd_speed(&self) -> Vec<f64> {
        self.0.fd_speed.clone()
    }

    pub fn rom_speed(&self) -> Vec<f64> {
        self.0.rom_speed.clone()
    }

    pub fn final_error(&self) -> f64 {
        self.0.final_error
    }
}

/// Reference run, POD and reduced rerun on `[0, t_final]`.
#[wasm_bindgen]
pub fn pod_demo(n: usize, d: f64, amplitude: f64, theta: f64, time_periodic: bool, t_final: f64, e_pod: f64) -> Result<PodDemo, JsError> {
    let spec = demo::flow(amplitude, theta, time_periodic).map_err(js)?;
    demo::pod_summary(n, d, spec, t_final, e_pod).map(PodDemo).map_err(js)
}
