//! Fixed-length history of `(flag, observation, previous action)` frames.
//!
//! The flattened input at time t is, newest first,
//! `(f_t, o_t, a_{t-1}, f_{t-1}, o_{t-1}, a_{t-2}, ..., f_{t-H}, o_{t-H}, a_{t-H-1})`.
//! Frames from before the episode start are all zeros, flag included.

use std::collections::VecDeque;

use crate::error::{usage, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub flag: f64,
    pub observation: Vec<f64>,
    pub prev_action: Vec<f64>,
}

impl Frame {
    fn zeros(obs_dim: usize, act_dim: usize) -> Self {
        Self {
            flag: 0.0,
            observation: vec![0.0; obs_dim],
            prev_action: vec![0.0; act_dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    horizon: usize,
    obs_dim: usize,
    act_dim: usize,
    /// Newest first; always `horizon + 1` entries.
    frames: VecDeque<Frame>,
}

impl HistoryWindow {
    pub fn new(horizon: usize, obs_dim: usize, act_dim: usize) -> Self {
        let frames = (0..=horizon).map(|_| Frame::zeros(obs_dim, act_dim)).collect();
        Self {
            horizon,
            obs_dim,
            act_dim,
            frames,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn frame_dim(&self) -> usize {
        1 + self.obs_dim + self.act_dim
    }

    /// Length of [`flatten`](Self::flatten): `(H + 1) * (1 + obs_dim + act_dim)`.
    pub fn flat_dim(&self) -> usize {
        (self.horizon + 1) * self.frame_dim()
    }

    /// Frame `i` steps back from the newest (0 = current).
    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn push(&mut self, flag: f64, observation: &[f64], prev_action: &[f64]) -> Result<()> {
        if observation.len() != self.obs_dim || prev_action.len() != self.act_dim {
            return usage(format!(
                "frame dims ({}, {}) do not match window dims ({}, {})",
                observation.len(),
                prev_action.len(),
                self.obs_dim,
                self.act_dim
            ));
        }
        if flag != 0.0 && flag != 1.0 {
            return usage(format!("history flag must be 0 or 1, got {flag}"));
        }
        self.frames.pop_back();
        self.frames.push_front(Frame {
            flag,
            observation: observation.to_vec(),
            prev_action: prev_action.to_vec(),
        });
        Ok(())
    }

    /// Zeroes every frame; call at episode boundaries.
    pub fn reset(&mut self) {
        for f in &mut self.frames {
            *f = Frame::zeros(self.obs_dim, self.act_dim);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_dim());
        self.flatten_into(&mut out);
        out
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.clear();
        for f in &self.frames {
            out.push(f.flag);
            out.extend_from_slice(&f.observation);
            out.extend_from_slice(&f.prev_action);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_unrolled_layout() {
        let mut w = HistoryWindow::new(1, 2, 1);
        w.push(1.0, &[1.0, 2.0], &[0.0]).unwrap();
        w.push(0.0, &[0.0, 3.0], &[5.0]).unwrap();
        assert_eq!(w.flatten(), vec![0.0, 0.0, 3.0, 5.0, 1.0, 1.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_horizon_is_the_current_frame() {
        let mut w = HistoryWindow::new(0, 2, 2);
        w.push(1.0, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(w.flatten(), vec![1.0, 1.0, 2.0, 3.0, 4.0]);
        w.push(0.0, &[5.0, 6.0], &[7.0, 8.0]).unwrap();
        assert_eq!(w.flatten(), vec![0.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn episode_start_padding_is_zero() {
        let mut w = HistoryWindow::new(2, 2, 1);
        w.push(1.0, &[4.0, 5.0], &[0.0]).unwrap();
        let flat = w.flatten();
        assert_eq!(flat.len(), 12);
        assert_eq!(&flat[..4], &[1.0, 4.0, 5.0, 0.0]);
        assert!(flat[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_usage_error() {
        let mut w = HistoryWindow::new(1, 2, 1);
        assert!(matches!(w.push(1.0, &[1.0], &[0.0]), Err(crate::Error::Usage(_))));
        assert!(matches!(w.push(1.0, &[1.0, 2.0], &[]), Err(crate::Error::Usage(_))));
        assert!(w.push(0.5, &[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn reset_zeroes_and_is_idempotent() {
        let mut w = HistoryWindow::new(3, 2, 2);
        w.push(1.0, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        w.reset();
        assert!(w.flatten().iter().all(|&v| v == 0.0));
        let once = w.clone();
        w.reset();
        assert_eq!(w, once);
    }

    fn frame_strategy() -> impl Strategy<Value = (bool, Vec<f64>, Vec<f64>)> {
        (
            any::<bool>(),
            proptest::collection::vec(-10.0f64..10.0, 3),
            proptest::collection::vec(-1.0f64..1.0, 2),
        )
    }

    proptest! {
        #[test]
        fn shift_property(frames in proptest::collection::vec(frame_strategy(), 1..12), h in 0usize..5) {
            let mut w = HistoryWindow::new(h, 3, 2);
            for (flag, o, a) in &frames {
                let prev = w.clone();
                w.push(f64::from(u8::from(*flag)), o, a).unwrap();
                prop_assert_eq!(w.flatten().len(), w.flat_dim());
                for i in 1..=h {
                    prop_assert_eq!(w.frame(i), prev.frame(i - 1));
                }
            }
        }

        #[test]
        fn no_leakage_across_episode_boundary(
            before_a in proptest::collection::vec(frame_strategy(), 0..8),
            before_b in proptest::collection::vec(frame_strategy(), 0..8),
            after in proptest::collection::vec(frame_strategy(), 1..8),
        ) {
            let run = |before: &[(bool, Vec<f64>, Vec<f64>)]| {
                let mut w = HistoryWindow::new(4, 3, 2);
                for (f, o, a) in before {
                    w.push(f64::from(u8::from(*f)), o, a).unwrap();
                }
                w.reset();
                after
                    .iter()
                    .map(|(f, o, a)| {
                        w.push(f64::from(u8::from(*f)), o, a).unwrap();
                        w.flatten()
                    })
                    .collect::<Vec<_>>()
            };
            prop_assert_eq!(run(&before_a), run(&before_b));
        }
    }
}
