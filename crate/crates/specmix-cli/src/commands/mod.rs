mod bundle;
mod calibrate;
mod design;
mod identify;
mod library;
mod quantify;
mod synthcmd;

pub use bundle::{ModelBundle, Preprocessing};
pub use calibrate::{cmd_calibrate, CalibrateArgs, CalibrationReport};
pub use design::{cmd_design, DesignArgs};
pub use identify::{cmd_identify, IdentificationReport, IdentifiedComponent};
pub use library::{cmd_lib_add, cmd_lib_list, cmd_lib_show, LibAddArgs};
pub use quantify::{cmd_quantify, QuantifyArgs, QuantificationReport};
pub use synthcmd::{cmd_synth_material, cmd_synth_mix, SynthMaterialArgs, SynthMixArgs};
