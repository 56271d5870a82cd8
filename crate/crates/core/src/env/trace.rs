//! Per-step trace records and their CSV form.
//!
//! Environment traces carry `t_s,target_rad,pitch_rad,omega_rad_s,action_v,reward`;
//! deployment traces append `omega_hat_rad_s,overrun`. Floats are written with
//! 17 significant digits so they round-trip exactly.

use std::io::{self, Write};

pub const ENV_TRACE_HEADER: [&str; 6] = [
    "t_s",
    "target_rad",
    "pitch_rad",
    "omega_rad_s",
    "action_v",
    "reward",
];

pub const DEPLOY_EXTRA_HEADER: [&str; 2] = ["omega_hat_rad_s", "overrun"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t_s: f64,
    pub target_rad: f64,
    pub pitch_rad: f64,
    pub omega_rad_s: f64,
    pub action_v: f64,
    pub reward: f64,
}

/// Extra per-tick columns recorded by the deployment loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeployColumns {
    pub omega_hat_rad_s: f64,
    pub overrun: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
    /// Present only on deployment traces; same length as `rows` when present.
    pub deploy: Option<Vec<DeployColumns>>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.reward).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header: Vec<&str> = ENV_TRACE_HEADER.to_vec();
        if self.deploy.is_some() {
            header.extend(DEPLOY_EXTRA_HEADER);
        }
        writeln!(out, "{}", header.join(","))?;
        for (i, r) in self.rows.iter().enumerate() {
            let mut line = [r.t_s, r.target_rad, r.pitch_rad, r.omega_rad_s, r.action_v, r.reward]
                .map(fmt_f64)
                .join(",");
            if let Some(extra) = self.deploy.as_ref().map(|d| d[i]) {
                line.push(',');
                line.push_str(&fmt_f64(extra.omega_hat_rad_s));
                line.push_str(if extra.overrun { ",1" } else { ",0" });
            }
            writeln!(out, "{line}")?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, std::f64::consts::PI, 1e-300, -0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn csv_layout() {
        let row = TraceRow {
            t_s: 0.1,
            target_rad: 0.2,
            pitch_rad: 0.0,
            omega_rad_s: 0.0,
            action_v: 1.0,
            reward: -0.2,
        };
        let mut trace = EpisodeTrace { rows: vec![row], deploy: None };
        let text = trace.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t_s,target_rad,pitch_rad,omega_rad_s,action_v,reward");
        assert_eq!(lines.next().unwrap().split(',').count(), 6);

        trace.deploy = Some(vec![DeployColumns { omega_hat_rad_s: 0.5, overrun: true }]);
        let text = trace.to_csv_string();
        assert!(text.starts_with("t_s,target_rad,pitch_rad,omega_rad_s,action_v,reward,omega_hat_rad_s,overrun\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",1"));
    }
}
