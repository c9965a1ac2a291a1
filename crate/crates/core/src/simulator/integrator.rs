/// One classical fourth-order Runge-Kutta step of `dx/dt = f(t, x)`.
///
/// `rhs(t, x, dx)` writes the derivative into `dx`; its error aborts the step.
pub fn rk4_step<F, E>(mut rhs: F, t: f64, x: &[f64], dt: f64) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let half = 0.5 * dt;

    rhs(t, x, &mut k1)?;
    for i in 0..n {
        stage[i] = x[i] + half * k1[i];
    }
    rhs(t + half, &stage, &mut k2)?;
    for i in 0..n {
        stage[i] = x[i] + half * k2[i];
    }
    rhs(t + half, &stage, &mut k3)?;
    for i in 0..n {
        stage[i] = x[i] + dt * k3[i];
    }
    rhs(t + dt, &stage, &mut k4)?;

    Ok((0..n)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}
