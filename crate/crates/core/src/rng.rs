//! Named random substreams derived from one run seed.
//!
//! Each concern draws from its own ChaCha stream so that, for example,
//! changing the equipment rate never perturbs routes or departures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    Routes = 1,
    Departures = 2,
    VehicleEquipment = 3,
    LightEquipment = 4,
    Offsets = 5,
}

pub fn substream(seed: u64, which: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
