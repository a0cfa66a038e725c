use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mrseq_core::provenance::Provenance;
use mrseq_core::synth::{
    external_profiles, generate_dataset, internal_profiles, write_dataset, ProfileSet, ShiftKnobs, TruthRow,
};
use serde::{Deserialize, Serialize};

use crate::io::{config_hash, read_text, write_rows, write_text};
use crate::{require_file, CliError};

pub const DICOM_DIR: &str = "dicom";
const TRUTH_HEADER: &[&str] = &[
    "collection",
    "patient_id",
    "series_uid",
    "truth",
    "description",
    "instances",
    "is4d_drawn",
    "nonconforming",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Internal,
    External,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory; DICOM files go under `dicom/<collection>/`, next to
    /// `<collection>.truth.csv` and `<collection>.profiles.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub patients: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::Internal)]
    pub profile: Preset,
    /// Profile set JSON; replaces --profile, --overlap and --is4d-noise.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// DWI/ADC TR and TE overlap in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub overlap: f64,
    /// Probability that a DWI series is written without repeated positions.
    #[arg(long, default_value_t = 0.0)]
    pub is4d_noise: f64,
    /// Collection name override.
    #[arg(long)]
    pub name: Option<String>,
}

/// Profile file as written next to the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilesFile {
    pub provenance: Provenance,
    pub profiles: ProfileSet,
}

fn load_profiles(path: &Path) -> Result<ProfileSet, CliError> {
    require_file(path, "profile set")?;
    let text = read_text(path, "profile set")?;
    let profiles = match serde_json::from_str::<ProfilesFile>(&text) {
        Ok(f) => f.profiles,
        Err(_) => serde_json::from_str::<ProfileSet>(&text)
            .map_err(|e| CliError::Input(format!("bad profile set {}: {e}", path.display())))?,
    };
    profiles.validate().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(profiles)
}

#[derive(Serialize)]
struct Config<'a> {
    command: &'static str,
    patients: usize,
    profiles: &'a ProfileSet,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    if args.patients == 0 {
        return Err(CliError::Usage("--patients must be at least 1".into()));
    }
    let knobs_ok = |v: f64| (0.0..=1.0).contains(&v);
    if !knobs_ok(args.overlap) || !knobs_ok(args.is4d_noise) {
        return Err(CliError::Usage("--overlap and --is4d-noise must lie in [0, 1]".into()));
    }
    let mut profiles = match &args.profiles {
        Some(path) => load_profiles(path)?,
        None => {
            let knobs = ShiftKnobs {
                dwi_adc_overlap: args.overlap,
                is4d_noise: args.is4d_noise,
            };
            match args.profile {
                Preset::Internal => internal_profiles(knobs),
                Preset::External => external_profiles(knobs),
            }
        }
    };
    if let Some(name) = &args.name {
        profiles.name = name.clone();
    }
    profiles.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let prov = Provenance::new(
        args.seed,
        config_hash(&Config {
            command: "synth",
            patients: args.patients,
            profiles: &profiles,
        }),
    );
    let data = generate_dataset(&profiles, args.patients, args.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let written = write_dataset(&data, &args.out.join(DICOM_DIR))
        .map_err(|e| CliError::Input(format!("cannot write dataset: {e}")))?;
    let truth: Vec<TruthRow> = data.iter().map(|s| s.truth_row()).collect();
    let name = profiles.name.clone();
    write_rows(&args.out.join(format!("{name}.truth.csv")), &prov, TRUTH_HEADER, &truth)?;
    let file = ProfilesFile {
        provenance: prov,
        profiles,
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| CliError::Internal(e.to_string()))?;
    write_text(&args.out.join(format!("{name}.profiles.json")), &(json + "\n"))?;
    println!(
        "wrote {} series ({} files) for {} patients",
        data.len(),
        written.len(),
        args.patients
    );
    Ok(())
}
