//! Scenario description: workspace layout, color pattern, block inventories
//! and nominal processing times. Loaded from and saved to JSON.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{Agent, Color, ColorCounts, Distance, Inventory, TaskId};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("pattern has no entry for subtask {0}")]
    MissingPattern(TaskId),
    #[error("pattern entry {0} is outside the workspace layout")]
    UnknownSubtask(TaskId),
    #[error("no color distance for {agent}/{color}")]
    MissingDistance { agent: Agent, color: Color },
    #[error("nominal time for {agent}/{distance:?} must be positive")]
    BadTime { agent: Agent, distance: Distance },
    #[error("layout must have at least one workspace and one spot")]
    EmptyLayout,
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("malformed scenario: {0}")]
    Parse(String),
}

/// Per-agent mapping from color to table distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorDistances {
    pub human: BTreeMap<Color, Distance>,
    pub robot: BTreeMap<Color, Distance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearFar {
    pub near: f64,
    pub far: f64,
}

impl NearFar {
    pub fn get(&self, d: Distance) -> f64 {
        match d {
            Distance::Near => self.near,
            Distance::Far => self.far,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalTimes {
    pub human: NearFar,
    pub robot: NearFar,
}

impl NominalTimes {
    pub fn of(&self, agent: Agent) -> NearFar {
        match agent {
            Agent::Human => self.human,
            Agent::Robot => self.robot,
        }
    }
}

impl Default for NominalTimes {
    fn default() -> Self {
        NominalTimes {
            human: NearFar {
                near: 12.0,
                far: 20.0,
            },
            robot: NearFar {
                near: 35.0,
                far: 60.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub workspaces: u32,
    pub spots_per_workspace: u32,
    /// Required color of every subtask.
    pub pattern: BTreeMap<TaskId, Color>,
    /// Spots shown with two candidate colors on the reminder sheet; the value
    /// is the decoy color.
    #[serde(default)]
    pub partially_known: BTreeMap<TaskId, Color>,
    pub block_inventory: Inventory,
    pub color_distance: ColorDistances,
    #[serde(default)]
    pub nominal_times: NominalTimes,
}

/// The four study patterns, one row per workspace.
const PATTERNS: [[[Color; 5]; 4]; 4] = {
    use Color::*;
    [
        [
            [Green, Pink, Orange, Blue, Green],
            [Blue, Orange, Pink, Green, Pink],
            [Orange, Blue, Green, Pink, Orange],
            [Pink, Green, Blue, Orange, Blue],
        ],
        [
            [Pink, Orange, Blue, Green, Orange],
            [Green, Blue, Pink, Orange, Pink],
            [Blue, Green, Orange, Pink, Green],
            [Orange, Pink, Green, Blue, Blue],
        ],
        [
            [Orange, Green, Pink, Pink, Blue],
            [Blue, Pink, Green, Orange, Green],
            [Green, Orange, Blue, Blue, Pink],
            [Pink, Blue, Orange, Green, Orange],
        ],
        [
            [Blue, Blue, Green, Orange, Pink],
            [Pink, Green, Orange, Blue, Orange],
            [Orange, Pink, Blue, Green, Green],
            [Green, Orange, Pink, Pink, Blue],
        ],
    ]
};

/// Partially known spot counts for patterns A-D.
const PARTIAL_COUNTS: [usize; 4] = [9, 12, 6, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyPattern {
    A,
    B,
    C,
    D,
}

impl ScenarioConfig {
    /// Study scenario with pattern A.
    pub fn study() -> Self {
        Self::study_pattern(StudyPattern::A)
    }

    pub fn study_pattern(which: StudyPattern) -> Self {
        let idx = which as usize;
        let rows = PATTERNS[idx];
        let mut pattern = BTreeMap::new();
        for (w, row) in rows.iter().enumerate() {
            for (s, &c) in row.iter().enumerate() {
                pattern.insert(TaskId((w * 5 + s + 1) as u32), c);
            }
        }
        // Spread the partially known spots over the grid with a fixed stride;
        // the decoy is the next color in the palette.
        let mut partially_known = BTreeMap::new();
        let stride = 7;
        let mut k = idx * 3;
        while partially_known.len() < PARTIAL_COUNTS[idx] {
            let id = TaskId((k % 20) as u32 + 1);
            partially_known.entry(id).or_insert_with(|| {
                let truth = pattern[&id];
                let pos = Color::ALL.iter().position(|&c| c == truth).unwrap();
                Color::ALL[(pos + 1) % 4]
            });
            k += stride;
        }
        ScenarioConfig {
            workspaces: 4,
            spots_per_workspace: 5,
            pattern,
            partially_known,
            block_inventory: Inventory {
                human: ColorCounts::uniform(10),
                robot: ColorCounts::uniform(8),
            },
            color_distance: ColorDistances::study(),
            nominal_times: NominalTimes::default(),
        }
    }

    pub fn subtask_id(&self, workspace: u32, spot: u32) -> TaskId {
        TaskId((workspace - 1) * self.spots_per_workspace + spot)
    }

    pub fn distance(&self, agent: Agent, color: Color) -> Distance {
        let table = match agent {
            Agent::Human => &self.color_distance.human,
            Agent::Robot => &self.color_distance.robot,
        };
        table.get(&color).copied().unwrap_or(Distance::Far)
    }

    pub fn nominal_time(&self, agent: Agent, color: Color) -> f64 {
        self.nominal_times
            .of(agent)
            .get(self.distance(agent, color))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.workspaces == 0 || self.spots_per_workspace == 0 {
            return Err(ConfigError::EmptyLayout);
        }
        let n = self.workspaces * self.spots_per_workspace;
        for id in 1..=n {
            if !self.pattern.contains_key(&TaskId(id)) {
                return Err(ConfigError::MissingPattern(TaskId(id)));
            }
        }
        if let Some(id) = self.pattern.keys().find(|id| id.0 == 0 || id.0 > n) {
            return Err(ConfigError::UnknownSubtask(*id));
        }
        for agent in [Agent::Human, Agent::Robot] {
            let table = match agent {
                Agent::Human => &self.color_distance.human,
                Agent::Robot => &self.color_distance.robot,
            };
            for &color in self.pattern.values() {
                if !table.contains_key(&color) {
                    return Err(ConfigError::MissingDistance { agent, color });
                }
            }
            let t = self.nominal_times.of(agent);
            for (d, v) in [(Distance::Near, t.near), (Distance::Far, t.far)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigError::BadTime { agent, distance: d });
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

impl ColorDistances {
    /// Green is near both agents, blue far from both, pink near the robot
    /// only and orange near the human only.
    pub fn study() -> Self {
        use Color::*;
        use Distance::*;
        ColorDistances {
            human: BTreeMap::from([(Green, Near), (Pink, Far), (Orange, Near), (Blue, Far)]),
            robot: BTreeMap::from([(Green, Near), (Pink, Near), (Orange, Far), (Blue, Far)]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_patterns_use_five_of_each_color() {
        for p in [
            StudyPattern::A,
            StudyPattern::B,
            StudyPattern::C,
            StudyPattern::D,
        ] {
            let cfg = ScenarioConfig::study_pattern(p);
            cfg.validate().unwrap();
            for c in Color::ALL {
                assert_eq!(
                    cfg.pattern.values().filter(|&&x| x == c).count(),
                    5,
                    "{p:?} {c}"
                );
            }
        }
    }

    #[test]
    fn partially_known_counts() {
        let counts: Vec<usize> = [
            StudyPattern::A,
            StudyPattern::B,
            StudyPattern::C,
            StudyPattern::D,
        ]
        .map(|p| ScenarioConfig::study_pattern(p).partially_known.len())
        .into();
        assert_eq!(counts, vec![9, 12, 6, 9]);
        let cfg = ScenarioConfig::study();
        for (id, decoy) in &cfg.partially_known {
            assert_ne!(cfg.pattern[id], *decoy);
        }
    }

    #[test]
    fn study_distances() {
        let cfg = ScenarioConfig::study();
        use Color::*;
        use Distance::*;
        let rows = [
            (Green, Near, Near),
            (Pink, Far, Near),
            (Orange, Near, Far),
            (Blue, Far, Far),
        ];
        for (c, h, r) in rows {
            assert_eq!(cfg.distance(Agent::Human, c), h);
            assert_eq!(cfg.distance(Agent::Robot, c), r);
        }
        assert_eq!(cfg.block_inventory.human.get(Blue), 10);
        assert_eq!(cfg.block_inventory.robot.get(Blue), 8);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::study();
        let back = ScenarioConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            ScenarioConfig::from_json("{\"workspaces\": 4"),
            Err(ConfigError::Parse(_))
        ));
    }
}
