use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which skip-connection branch the network carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    /// Plain skips: no graph block, no entropy gate.
    S0,
    /// Graph block on the deepest stage only, without node attention.
    S1,
    /// Graph block on the deepest stage only, with node attention.
    S2,
    /// Cross-scale graph block without node attention.
    S3,
    /// Cross-scale graph block with node attention (full model).
    S4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchScale {
    None,
    Single,
    Cross,
}

impl Setting {
    pub const ALL: [Setting; 5] = [Setting::S0, Setting::S1, Setting::S2, Setting::S3, Setting::S4];

    pub fn scale(self) -> BranchScale {
        match self {
            Setting::S0 => BranchScale::None,
            Setting::S1 | Setting::S2 => BranchScale::Single,
            Setting::S3 | Setting::S4 => BranchScale::Cross,
        }
    }

    pub fn node_attention(self) -> bool {
        matches!(self, Setting::S2 | Setting::S4)
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::S0 => "S0",
            Setting::S1 => "S1",
            Setting::S2 => "S2",
            Setting::S3 => "S3",
            Setting::S4 => "S4",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown setting '{s}' (expected S0..S4)")))
    }
}

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `(H, W)`, both divisible by 32.
    pub input_size: (usize, usize),
    /// Output widths of the four encoder stages (the stem uses the first).
    pub encoder_channels: [usize; 4],
    /// Width every skip feature is reduced to (`C_r`).
    pub reduced_channels: usize,
    /// The graph grid is `(H / 2^s, W / 2^s)`, `s ∈ {2, 3, 4, 5}`.
    pub target_scale: u32,
    pub k_neighbors: usize,
    pub dilation: usize,
    /// Node-attention 1D kernel width (odd).
    pub attention_kernel: usize,
    /// Number of lowest-entropy channels feeding the spatial gate (`M`).
    pub selected_channels: usize,
    /// How many graph-block + entropy-gate pairs are stacked (`G`).
    pub repetitions: usize,
    pub setting: Setting,
    /// Seed of the parameter initialisation.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_size: (64, 64),
            encoder_channels: [16, 32, 64, 128],
            reduced_channels: 64,
            target_scale: 3,
            k_neighbors: 11,
            dilation: 1,
            attention_kernel: 3,
            selected_channels: 64,
            repetitions: 1,
            setting: Setting::S4,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// Resolution of encoder stage `i` (1-based): `(H / 2^{i+1}, W / 2^{i+1})`.
    pub fn stage_resolution(&self, stage: usize) -> (usize, usize) {
        let f = 1 << (stage + 1);
        (self.input_size.0 / f, self.input_size.1 / f)
    }

    pub fn target_resolution(&self) -> (usize, usize) {
        let f = 1 << self.target_scale;
        (self.input_size.0 / f, self.input_size.1 / f)
    }

    /// Channel width seen by the graph block.
    pub fn branch_channels(&self) -> usize {
        match self.setting.scale() {
            BranchScale::Single => self.reduced_channels,
            _ => 4 * self.reduced_channels,
        }
    }

    /// Grid the graph block runs on.
    pub fn graph_grid(&self) -> (usize, usize) {
        match self.setting.scale() {
            BranchScale::Single => self.stage_resolution(4),
            _ => self.target_resolution(),
        }
    }

    /// `M` actually used: capped at the branch width for single-scale runs.
    pub fn effective_selected(&self) -> usize {
        match self.setting.scale() {
            BranchScale::Single => self.selected_channels.min(self.reduced_channels),
            _ => self.selected_channels,
        }
    }

    pub fn ffn_hidden(&self) -> usize {
        self.branch_channels()
    }

    /// Equal in everything but the initialisation seed.
    pub fn same_architecture(&self, other: &ModelConfig) -> bool {
        *self == ModelConfig { seed: self.seed, ..other.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_size;
        if h == 0 || w == 0 || h % 32 != 0 || w % 32 != 0 {
            return Err(Error::Config(format!("input size {h}×{w} must be positive multiples of 32")));
        }
        if self.encoder_channels.contains(&0) || self.reduced_channels == 0 {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if !(2..=5).contains(&self.target_scale) {
            return Err(Error::Config(format!("target scale {} outside 2..=5", self.target_scale)));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.attention_kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("attention kernel {} must be odd", self.attention_kernel)));
        }
        if self.setting.scale() == BranchScale::None {
            return Ok(());
        }
        let m = self.effective_selected();
        if m == 0 || m > self.branch_channels() {
            return Err(Error::Config(format!(
                "M = {} must lie in 1..={} (4·C_r)",
                self.selected_channels,
                self.branch_channels()
            )));
        }
        let (gh, gw) = self.graph_grid();
        let n = gh * gw;
        if self.k_neighbors == 0 || self.dilation == 0 || n <= self.k_neighbors * self.dilation {
            return Err(Error::Config(format!(
                "graph grid {gh}×{gw} has {n} nodes, too few for K = {} at dilation {}",
                self.k_neighbors, self.dilation
            )));
        }
        Ok(())
    }
}
