use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Road identifier: county tag plus travel direction.
pub type Road = (String, String);

/// Peak traffic volumes keyed by (county, direction, index).
///
/// The index stands in for the hour of day.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrafficVolumeTable {
    volumes: BTreeMap<(String, String, u32), f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    county: String,
    direction: String,
    index: u32,
    volume: f64,
}

impl TrafficVolumeTable {
    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn get(&self, county: &str, direction: &str, index: u32) -> Option<f64> {
        self.volumes
            .get(&(county.to_string(), direction.to_string(), index))
            .copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32, f64)> {
        self.volumes
            .iter()
            .map(|((c, d, i), v)| (c.as_str(), d.as_str(), *i, *v))
    }

    /// Distinct roads in sorted order. These become the OD pairs.
    pub fn roads(&self) -> Vec<Road> {
        let mut out: Vec<Road> = Vec::new();
        for (c, d, _) in self.volumes.keys() {
            if out.last().is_none_or(|(lc, ld)| lc != c || ld != d) {
                out.push((c.clone(), d.clone()));
            }
        }
        out
    }

    /// Distinct indices in ascending order. These become the time steps.
    pub fn indices(&self) -> Vec<u32> {
        let mut idx: Vec<u32> = self.volumes.keys().map(|k| k.2).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    /// `volume[s][t]` over [`roads`](Self::roads) × [`indices`](Self::indices).
    /// Every road must cover every index.
    pub fn volume_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let indices = self.indices();
        self.roads()
            .iter()
            .map(|(c, d)| {
                indices
                    .iter()
                    .map(|&i| {
                        self.get(c, d, i).ok_or_else(|| {
                            Error::ShapeMismatch(format!("no volume for {c} {d} at index {i}"))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Parses `county,direction,index,volume` rows. Repeated keys are
    /// averaged.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut sums: BTreeMap<(String, String, u32), (f64, u32)> = BTreeMap::new();
        let headers = rdr.headers()?.clone();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let row: Row = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if !row.volume.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("volume {} is not finite", row.volume),
                });
            }
            if row.volume < 0.0 {
                return Err(Error::NegativeVolume {
                    line,
                    volume: row.volume,
                });
            }
            let e = sums.entry((row.county, row.direction, row.index)).or_default();
            e.0 += row.volume;
            e.1 += 1;
        }
        let volumes = sums.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect();
        Ok(TrafficVolumeTable { volumes })
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["county", "direction", "index", "volume"])?;
        for (c, d, i, v) in self.iter() {
            w.write_record([c, d, &i.to_string(), &format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(std::fs::File::create(path)?)
    }
}

impl FromIterator<(Road, u32, f64)> for TrafficVolumeTable {
    fn from_iter<I: IntoIterator<Item = (Road, u32, f64)>>(iter: I) -> Self {
        TrafficVolumeTable {
            volumes: iter.into_iter().map(|((c, d), i, v)| ((c, d, i), v)).collect(),
        }
    }
}

pub fn load_traffic_csv(path: &Path) -> Result<TrafficVolumeTable> {
    TrafficVolumeTable::from_reader(std::fs::File::open(path)?)
}

/// Shape of a synthetic volume file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTraffic {
    /// (county, direction, daily peak volume)
    pub roads: Vec<(String, String, f64)>,
    pub indices: u32,
    /// Relative standard deviation of the multiplicative noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticTraffic {
    fn default() -> Self {
        let road = |c: &str, d: &str, v: f64| (c.to_string(), d.to_string(), v);
        SyntheticTraffic {
            roads: vec![
                road("INY", "S", 900.0),
                road("LA", "N", 7500.0),
                road("KER", "W", 2600.0),
                road("FRE", "S", 3400.0),
                road("IMP", "S", 1500.0),
            ],
            indices: 24,
            noise: 0.05,
            seed: 7,
        }
    }
}

/// Daily profile in `(0, 1]` with a morning and an evening peak.
pub fn daily_profile(hour: f64) -> f64 {
    let bump = |centre: f64, width: f64| (-(hour - centre).powi(2) / (2.0 * width * width)).exp();
    let raw = 0.25 + 0.75 * bump(8.0, 1.6) + 0.85 * bump(17.5, 2.0) + 0.2 * bump(12.5, 3.0);
    (raw / 1.1).min(1.0)
}

/// Builds a volume table with rush-hour peaks and lognormal-ish noise.
pub fn generate_synthetic(spec: &SyntheticTraffic) -> Result<TrafficVolumeTable> {
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise must be nonnegative, got {}", spec.noise)));
    }
    if let Some((c, d, v)) = spec.roads.iter().find(|r| !(r.2 >= 0.0 && r.2.is_finite())) {
        return Err(Error::InvalidParameter(format!("peak volume {v} for {c} {d}")));
    }
    let noise = Normal::new(0.0, spec.noise)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let hours_per_index = 24.0 / spec.indices.max(1) as f64;
    let mut rows = Vec::with_capacity(spec.roads.len() * spec.indices as usize);
    for (c, d, peak) in &spec.roads {
        for i in 0..spec.indices {
            let level = peak * daily_profile(i as f64 * hours_per_index);
            let v = (level * noise.sample(&mut rng).exp()).round();
            rows.push(((c.clone(), d.clone()), i, v));
        }
    }
    Ok(rows.into_iter().collect())
}
