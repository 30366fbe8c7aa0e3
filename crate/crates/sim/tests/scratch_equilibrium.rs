use crossway_sim::behavior::{idm_acceleration, DrivingStyle};

#[test]
fn probe_settled_gaps() {
    for style in DrivingStyle::ALL {
        let p = style.idm();
        for (v0, gap0) in [
            (5.0, 30.0),
            (5.0, 15.0),
            (2.0, 30.0),
            (0.0, 30.0),
            (0.0, 10.0),
            (8.0, 50.0),
        ] {
            for dt in [0.1, 0.01] {
                let mut v: f64 = v0;
                let mut gap: f64 = gap0;
                let steps = (60.0 / dt) as usize;
                for _ in 0..steps {
                    let a = idm_acceleration(&p, v, gap, v);
                    gap -= v * dt;
                    v += a * dt;
                }
                eprintln!(
                    "{style:?} v0={v0} gap0={gap0} dt={dt}: settled {gap:.3} (d0={}, err {:+.3}) vfinal={v:.4}",
                    p.min_gap,
                    gap - p.min_gap
                );
            }
        }
    }
}
