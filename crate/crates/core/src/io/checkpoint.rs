use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::seq::{read_sequence, write_sequence};
use crate::engine::{EngineParams, EngineState, SubspaceMode};
use crate::error::{Error, Result};
use crate::frames::FrameSequence;
use crate::linalg::{approx_basis_energy, BasisMatrix, SingularSpectrum};

pub const CHECKPOINT_FORMAT: &str = "reprocs-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// The trained initial state: `P̂_0`, its scaled singular values, the training
/// mean and the last (centred) training frame.
///
/// On disk this is a directory holding `manifest.txt` and four sequence files.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub basis: BasisMatrix,
    pub spectrum: SingularSpectrum,
    pub mean: Array1<f64>,
    pub last_frame: Array1<f64>,
    pub t_train: usize,
    pub b_percent: f64,
}

impl Checkpoint {
    /// Estimate `P̂_0` from sparse-free training frames. With `center`, the
    /// per-pixel training mean is subtracted first and stored so later frames
    /// can be centred the same way.
    pub fn train(training: &FrameSequence, b_percent: f64, center: bool) -> Result<Self> {
        if training.is_empty() || training.n() == 0 {
            return Err(Error::EmptyInput);
        }
        let n = training.n();
        let t_train = training.len();
        let mean = if center {
            training.mean()
        } else {
            Array1::zeros(n)
        };
        let mut centred = training.matrix().to_owned();
        for mut col in centred.columns_mut() {
            col -= &mean;
        }
        let scaled = centred.mapv(|x| x / (t_train as f64).sqrt());
        let (basis, spectrum) = approx_basis_energy(scaled.view(), b_percent)?;
        if basis.is_empty() {
            return Err(Error::ZeroEnergy);
        }
        Ok(Checkpoint {
            basis,
            spectrum,
            last_frame: centred.column(t_train - 1).to_owned(),
            mean,
            t_train,
            b_percent,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn r_hat(&self) -> usize {
        self.basis.rank()
    }

    pub fn sigma_min(&self) -> f64 {
        self.spectrum.last().unwrap_or(0.0)
    }

    pub fn engine(&self, mut params: EngineParams, mode: SubspaceMode) -> Result<EngineState> {
        params.b_percent = self.b_percent;
        EngineState::from_trained(
            self.basis.clone(),
            self.spectrum.clone(),
            self.last_frame.clone(),
            self.t_train,
            params,
            mode,
        )
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let manifest = format!(
            "format={CHECKPOINT_FORMAT}\nversion={CHECKPOINT_VERSION}\nn={}\nr_hat={}\nt_train={}\nb_percent={}\nsigma_min={}\n",
            self.n(),
            self.r_hat(),
            self.t_train,
            self.b_percent,
            self.sigma_min()
        );
        write_sequence(dir.join("basis.seq"), &FrameSequence::new(self.basis.matrix().to_owned()))?;
        write_sequence(dir.join("spectrum.seq"), &column(Array1::from(self.spectrum.values().to_vec())))?;
        write_sequence(dir.join("mean.seq"), &column(self.mean.clone()))?;
        write_sequence(dir.join("last_frame.seq"), &column(self.last_frame.clone()))?;
        fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join("manifest.txt")).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Format(format!("{}: not a checkpoint directory", dir.display()))
            }
            _ => Error::Io(e),
        })?;
        let manifest = parse_manifest(&text)?;
        let get = |key: &str| {
            manifest
                .get(key)
                .ok_or_else(|| Error::Format(format!("checkpoint manifest lacks {key}")))
        };
        if get("format")? != CHECKPOINT_FORMAT {
            return Err(Error::Format("not a checkpoint manifest".into()));
        }
        if get("version")? != &CHECKPOINT_VERSION.to_string() {
            return Err(Error::Format(format!("unsupported checkpoint version {}", get("version")?)));
        }
        let number = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("checkpoint manifest: bad {key}")))
        };
        let n = number("n")? as usize;
        let r = number("r_hat")? as usize;
        let t_train = number("t_train")? as usize;
        let b_percent = number("b_percent")?;

        let basis = read_sequence(dir.join("basis.seq"))?;
        let spectrum = single_column(read_sequence(dir.join("spectrum.seq"))?, r, "spectrum")?;
        let mean = single_column(read_sequence(dir.join("mean.seq"))?, n, "mean")?;
        let last_frame = single_column(read_sequence(dir.join("last_frame.seq"))?, n, "last_frame")?;
        if basis.n() != n || basis.len() != r {
            return Err(Error::Format(format!(
                "checkpoint basis is {}x{}, manifest says {n}x{r}",
                basis.n(),
                basis.len()
            )));
        }
        let basis = BasisMatrix::new(basis.into_matrix())
            .map_err(|e| Error::Format(format!("checkpoint basis: {e}")))?;
        let spectrum = SingularSpectrum::new(spectrum.to_vec())
            .map_err(|e| Error::Format(format!("checkpoint spectrum: {e}")))?;
        Ok(Checkpoint {
            basis,
            spectrum,
            mean,
            last_frame,
            t_train,
            b_percent,
        })
    }
}

fn column(v: Array1<f64>) -> FrameSequence {
    let n = v.len();
    FrameSequence::new(v.into_shape_with_order((n, 1)).expect("column shape"))
}

fn single_column(seq: FrameSequence, n: usize, what: &str) -> Result<Array1<f64>> {
    if seq.len() != 1 || seq.n() != n {
        return Err(Error::Format(format!(
            "checkpoint {what}: expected {n}x1, found {}x{}",
            seq.n(),
            seq.len()
        )));
    }
    let m: Array2<f64> = seq.into_matrix();
    Ok(m.column(0).to_owned())
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("manifest line '{line}' is not key=value")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}
