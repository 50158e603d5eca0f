//! Parametric description of the surface-mounted PM machine.
//!
//! All quantities are SI. The checked-in `configs/default_machine.toml` is the
//! serialized form of [`MachineSpec::default`].

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MU0: f64 = 4.0e-7 * PI;
pub const PHASES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub pole_pairs: usize,
    /// Relative permeability of the laminated stator and rotor iron.
    pub relative_permeability: f64,
    pub geometry: Geometry,
    pub slots: SlotGeometry,
    pub magnets: MagnetGeometry,
    pub winding: WindingSpec,
    pub drive: DriveSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub stator_outer_radius: f64,
    pub stator_inner_radius: f64,
    pub rotor_radius: f64,
    /// Inner boundary of the rotor iron; the vector potential is zero there.
    pub shaft_radius: f64,
    pub axial_length: f64,
    /// Radial position of the sliding contour inside the airgap, as a
    /// fraction of the gap measured from the rotor surface.
    pub interface_position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotGeometry {
    pub slots_per_pole_per_phase: usize,
    /// Slot width as a fraction of the slot pitch (open slots: opening = width).
    pub opening_fraction: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetGeometry {
    pub pole_arc_fraction: f64,
    pub thickness: f64,
    /// Remanent flux density magnitude (T).
    pub remanent_flux_density: f64,
    pub recoil_permeability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindingSpec {
    pub turns_per_coil_side: f64,
    /// Coil span in slot pitches (full pitch is 3 * slots_per_pole_per_phase).
    pub coil_pitch: usize,
    pub dc_phase_resistance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub phase_current_amplitude: f64,
    pub electrical_angular_frequency: f64,
    /// Electrical phase of phase-A current at t = 0. When absent the current
    /// is put in phase with the no-load back-EMF of phase A.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_angle: Option<f64>,
}

impl Default for MachineSpec {
    fn default() -> Self {
        MachineSpec {
            pole_pairs: 6,
            relative_permeability: 500.0,
            geometry: Geometry {
                stator_outer_radius: 0.075,
                stator_inner_radius: 0.051,
                rotor_radius: 0.050,
                shaft_radius: 0.030,
                axial_length: 0.010,
                interface_position: 0.75,
            },
            slots: SlotGeometry {
                slots_per_pole_per_phase: 2,
                opening_fraction: 1.0 / 3.0,
                depth: 0.012,
            },
            magnets: MagnetGeometry {
                pole_arc_fraction: 0.75,
                thickness: 0.004,
                remanent_flux_density: 1.2,
                recoil_permeability: 1.05,
            },
            winding: WindingSpec {
                turns_per_coil_side: 10.0,
                coil_pitch: 5,
                dc_phase_resistance: 0.5,
            },
            drive: DriveSpec {
                phase_current_amplitude: 11.8,
                electrical_angular_frequency: 2.0 * PI * 50.0,
                current_angle: None,
            },
        }
    }
}

impl MachineSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: MachineSpec = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<machine config>".into(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: MachineSpec = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("machine spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive, got {v}")))
            }
        };
        positive("geometry.axial_length", g.axial_length)?;
        positive("geometry.rotor_radius", g.rotor_radius)?;
        if !(g.shaft_radius >= 0.0) {
            return Err(Error::config(
                "geometry.shaft_radius",
                "must be non-negative",
            ));
        }
        if !(g.rotor_radius < g.stator_inner_radius
            && g.stator_inner_radius < g.stator_outer_radius)
        {
            return Err(Error::Geometry(format!(
                "radii must satisfy 0 < rotor ({}) < stator inner ({}) < stator outer ({})",
                g.rotor_radius, g.stator_inner_radius, g.stator_outer_radius
            )));
        }
        if !(g.interface_position > 0.0 && g.interface_position < 1.0) {
            return Err(Error::config(
                "geometry.interface_position",
                "must lie strictly inside (0, 1)",
            ));
        }
        if self.pole_pairs == 0 {
            return Err(Error::config("pole_pairs", "must be at least 1"));
        }
        if !(self.relative_permeability >= 1.0) {
            return Err(Error::config("relative_permeability", "must be >= 1"));
        }
        let s = &self.slots;
        if s.slots_per_pole_per_phase == 0 {
            return Err(Error::config(
                "slots.slots_per_pole_per_phase",
                "must be at least 1",
            ));
        }
        if !(s.opening_fraction > 0.0 && s.opening_fraction < 1.0) {
            return Err(Error::config(
                "slots.opening_fraction",
                "must lie in (0, 1)",
            ));
        }
        positive("slots.depth", s.depth)?;
        if g.stator_inner_radius + s.depth >= g.stator_outer_radius {
            return Err(Error::Geometry(
                "slots reach the stator outer boundary".into(),
            ));
        }
        let m = &self.magnets;
        if !(m.pole_arc_fraction > 0.0 && m.pole_arc_fraction <= 1.0) {
            return Err(Error::config(
                "magnets.pole_arc_fraction",
                "must lie in (0, 1]",
            ));
        }
        positive("magnets.thickness", m.thickness)?;
        if g.rotor_radius - m.thickness <= g.shaft_radius {
            return Err(Error::Geometry("magnets reach the shaft".into()));
        }
        if !(m.remanent_flux_density >= 0.0) {
            return Err(Error::config(
                "magnets.remanent_flux_density",
                "must be non-negative",
            ));
        }
        if !(m.recoil_permeability >= 1.0) {
            return Err(Error::config("magnets.recoil_permeability", "must be >= 1"));
        }
        let w = &self.winding;
        if w.coil_pitch == 0 || w.coil_pitch >= self.slot_count() {
            return Err(Error::config(
                "winding.coil_pitch",
                "must lie in [1, slot count)",
            ));
        }
        if !(w.dc_phase_resistance >= 0.0) {
            return Err(Error::config(
                "winding.dc_phase_resistance",
                "must be non-negative",
            ));
        }
        positive(
            "drive.electrical_angular_frequency",
            self.drive.electrical_angular_frequency,
        )?;
        Ok(())
    }

    /// q * 3 phases * 2p poles.
    pub fn slot_count(&self) -> usize {
        self.slots.slots_per_pole_per_phase * PHASES * 2 * self.pole_pairs
    }

    pub fn pole_count(&self) -> usize {
        2 * self.pole_pairs
    }

    /// Mean mechanical airgap width.
    pub fn airgap(&self) -> f64 {
        self.geometry.stator_inner_radius - self.geometry.rotor_radius
    }

    pub fn contour_radius(&self) -> f64 {
        self.geometry.rotor_radius + self.geometry.interface_position * self.airgap()
    }

    pub fn mechanical_angular_frequency(&self) -> f64 {
        self.drive.electrical_angular_frequency / self.pole_pairs as f64
    }

    /// Harmonic order (per mechanical revolution) of the cogging torque.
    pub fn cogging_order(&self) -> usize {
        lcm(self.slot_count(), self.pole_count())
    }

    pub fn winding_layout(&self) -> Result<WindingLayout> {
        WindingLayout::double_layer(
            self.slot_count(),
            self.pole_pairs,
            self.slots.slots_per_pole_per_phase,
            self.winding.coil_pitch,
            self.winding.turns_per_coil_side,
        )
    }
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoilLayer {
    /// Half of the slot next to the airgap.
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilSide {
    pub slot: usize,
    pub layer: CoilLayer,
    pub phase: usize,
    /// +1 when positive phase current flows in +z.
    pub sign: f64,
    pub turns: f64,
}

/// Assignment of coil sides to phases.
#[derive(Debug, Clone, PartialEq)]
pub struct WindingLayout {
    slot_count: usize,
    pole_pairs: usize,
    sides: Vec<CoilSide>,
}

impl WindingLayout {
    /// Integral-slot double-layer lap winding with 60 degree phase belts in
    /// the sequence A, -C, B, -A, C, -B.
    pub fn double_layer(
        slot_count: usize,
        pole_pairs: usize,
        slots_per_pole_per_phase: usize,
        coil_pitch: usize,
        turns: f64,
    ) -> Result<Self> {
        let q = slots_per_pole_per_phase;
        if q == 0 || slot_count != q * PHASES * 2 * pole_pairs {
            return Err(Error::Winding(format!(
                "{slot_count} slots is inconsistent with {pole_pairs} pole pairs and {q} slots per pole per phase"
            )));
        }
        if coil_pitch == 0 || coil_pitch >= slot_count {
            return Err(Error::Winding(format!(
                "coil pitch {coil_pitch} out of range"
            )));
        }
        const BELTS: [(usize, f64); 6] = [
            (0, 1.0),
            (2, -1.0),
            (1, 1.0),
            (0, -1.0),
            (2, 1.0),
            (1, -1.0),
        ];
        let top = |slot: usize| BELTS[(slot / q) % 6];
        let mut sides = Vec::with_capacity(2 * slot_count);
        for slot in 0..slot_count {
            let (phase, sign) = top(slot);
            sides.push(CoilSide {
                slot,
                layer: CoilLayer::Top,
                phase,
                sign,
                turns,
            });
            let (phase, sign) = top((slot + slot_count - coil_pitch) % slot_count);
            sides.push(CoilSide {
                slot,
                layer: CoilLayer::Bottom,
                phase,
                sign: -sign,
                turns,
            });
        }
        Self::from_sides(slot_count, pole_pairs, sides)
    }

    /// Validates an explicit layout: every (slot, layer) is filled exactly
    /// once and each phase carries zero net ampere-turns.
    pub fn from_sides(slot_count: usize, pole_pairs: usize, sides: Vec<CoilSide>) -> Result<Self> {
        let mut seen = vec![[false; 2]; slot_count];
        let mut net = [0.0; PHASES];
        for s in &sides {
            if s.slot >= slot_count {
                return Err(Error::Winding(format!(
                    "slot {} exceeds slot count {slot_count}",
                    s.slot
                )));
            }
            if s.phase >= PHASES {
                return Err(Error::Winding(format!(
                    "phase index {} out of range",
                    s.phase
                )));
            }
            let l = s.layer as usize;
            if seen[s.slot][l] {
                return Err(Error::Winding(format!(
                    "slot {} layer {:?} assigned twice",
                    s.slot, s.layer
                )));
            }
            seen[s.slot][l] = true;
            net[s.phase] += s.sign * s.turns;
        }
        if let Some(slot) = seen.iter().position(|l| !(l[0] && l[1])) {
            return Err(Error::Winding(format!("slot {slot} is not fully wound")));
        }
        if let Some(p) = net.iter().position(|n| n.abs() > 1e-9) {
            return Err(Error::Winding(format!("phase {p} has non-zero net turns")));
        }
        Ok(WindingLayout {
            slot_count,
            pole_pairs,
            sides,
        })
    }

    pub fn sides(&self) -> &[CoilSide] {
        &self.sides
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn side(&self, slot: usize, layer: CoilLayer) -> &CoilSide {
        self.sides
            .iter()
            .find(|s| s.slot == slot && s.layer == layer)
            .expect("validated layout fills every slot")
    }

    /// Electrical angle of the fundamental (pole-pair order) of each phase's
    /// conductor distribution, arg(sum n_j exp(i p theta_j)), with slots
    /// centred at (k + 1/2) * slot pitch.
    pub fn phase_axis_angles(&self) -> [f64; PHASES] {
        let pitch = 2.0 * PI / self.slot_count as f64;
        let p = self.pole_pairs as f64;
        let mut re = [0.0; PHASES];
        let mut im = [0.0; PHASES];
        for s in &self.sides {
            let theta = (s.slot as f64 + 0.5) * pitch;
            re[s.phase] += s.sign * s.turns * (p * theta).cos();
            im[s.phase] += s.sign * s.turns * (p * theta).sin();
        }
        std::array::from_fn(|k| im[k].atan2(re[k]))
    }
}

/// Balanced three-phase drive i_k(t) = I cos(w_e t + beta - 2 pi k / 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    Sinusoidal {
        amplitude: f64,
        electrical_angular_frequency: f64,
        angle: f64,
    },
    /// Time-invariant phase currents.
    Constant([f64; PHASES]),
}

impl Drive {
    pub fn currents(&self, t: f64) -> [f64; PHASES] {
        match *self {
            Drive::Sinusoidal {
                amplitude,
                electrical_angular_frequency,
                angle,
            } => std::array::from_fn(|k| {
                amplitude
                    * (electrical_angular_frequency * t + angle - 2.0 * PI * k as f64 / 3.0).cos()
            }),
            Drive::Constant(i) => i,
        }
    }

    pub fn zero() -> Self {
        Drive::Constant([0.0; PHASES])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Drive::Sinusoidal {
                amplitude,
                electrical_angular_frequency,
                angle,
            } => Drive::Sinusoidal {
                amplitude: amplitude * factor,
                electrical_angular_frequency,
                angle,
            },
            Drive::Constant(i) => Drive::Constant(i.map(|x| x * factor)),
        }
    }
}
