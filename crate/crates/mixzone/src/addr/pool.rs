use std::collections::BTreeMap;

use serde::Serialize;

use crate::clock::{SimClock, Timestamp};
use crate::protocol::Cid;

use super::{compose_address, AddrError, AddressSplit, Ipv6Address};

#[derive(Debug, Clone, Copy)]
struct Lease {
    expiry: Timestamp,
    cid: Cid,
}

/// One allocation record in a pool dump.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct LeaseRecord {
    pub address: String,
    pub cid: String,
    pub expiry_secs: u64,
}

/// Per-RSU vehicle-id pool. A lease binds a vehicle id to a holder
/// until its expiry; expired leases are reclaimed lazily on the next
/// allocation, so no separate reclamation protocol runs.
#[derive(Debug, Clone)]
pub struct AddressPool {
    rsu_id: u128,
    split: AddressSplit,
    lease_secs: u64,
    leases: BTreeMap<u64, Lease>,
}

impl AddressPool {
    pub fn new(rsu_id: u128, split: AddressSplit, lease_secs: u64) -> Result<Self, AddrError> {
        if split.rsu_bits() < 128 && rsu_id >= 1u128 << split.rsu_bits() {
            return Err(AddrError::WidthOverflow);
        }
        Ok(Self { rsu_id, split, lease_secs, leases: BTreeMap::new() })
    }

    pub fn rsu_id(&self) -> u128 {
        self.rsu_id
    }

    pub fn split(&self) -> AddressSplit {
        self.split
    }

    /// Leases the smallest vehicle id free among unexpired leases.
    pub fn allocate(
        &mut self,
        cid: Cid,
        clock: &SimClock,
    ) -> Result<(Ipv6Address, Timestamp), AddrError> {
        let now = clock.now();
        self.reclaim(now);
        if self.leases.len() as u128 >= self.split.capacity() {
            return Err(AddrError::PoolExhausted);
        }
        let mut candidate = 0u64;
        for id in self.leases.keys() {
            if *id > candidate {
                break;
            }
            candidate = id + 1;
        }
        let expiry = now.add_secs(self.lease_secs);
        self.leases.insert(candidate, Lease { expiry, cid });
        let addr = compose_address(self.rsu_id, candidate, self.split)
            .expect("candidate < capacity by construction");
        Ok((addr, expiry))
    }

    /// Drops every lease whose expiry has passed.
    fn reclaim(&mut self, now: Timestamp) {
        self.leases.retain(|_, lease| lease.expiry > now);
    }

    /// Leases still unexpired at `now`.
    pub fn occupancy(&self, now: Timestamp) -> usize {
        self.leases.values().filter(|l| l.expiry > now).count()
    }

    /// Unexpired addresses, for duplicate scanning.
    pub fn live_addresses(&self, now: Timestamp) -> Vec<Ipv6Address> {
        self.leases
            .iter()
            .filter(|(_, l)| l.expiry > now)
            .map(|(id, _)| {
                compose_address(self.rsu_id, *id, self.split).expect("leased ids fit the split")
            })
            .collect()
    }

    /// Machine-readable dump: one record per unexpired lease.
    pub fn dump(&self, now: Timestamp) -> Vec<LeaseRecord> {
        self.leases
            .iter()
            .filter(|(_, l)| l.expiry > now)
            .map(|(id, lease)| LeaseRecord {
                address: compose_address(self.rsu_id, *id, self.split)
                    .expect("leased ids fit the split")
                    .to_string(),
                cid: lease.cid.to_string(),
                expiry_secs: lease.expiry.secs(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cid(n: u8) -> Cid {
        Cid([n; 16])
    }

    #[test]
    fn smallest_free_policy() {
        let split = AddressSplit::new(8).unwrap();
        let mut pool = AddressPool::new(0xAB, split, 100).unwrap();
        let clock = SimClock::starting_at(0);
        let (a0, _) = pool.allocate(cid(1), &clock).unwrap();
        let (a1, _) = pool.allocate(cid(2), &clock).unwrap();
        assert_eq!(decompose_id(a0, split), 0);
        assert_eq!(decompose_id(a1, split), 1);
    }

    fn decompose_id(addr: Ipv6Address, split: AddressSplit) -> u64 {
        super::super::decompose_address(addr, split).1
    }

    #[test]
    fn exhaustion_at_capacity() {
        let split = AddressSplit::new(8).unwrap();
        let mut pool = AddressPool::new(1, split, 1000).unwrap();
        let clock = SimClock::starting_at(0);
        for _ in 0..256 {
            pool.allocate(cid(0), &clock).unwrap();
        }
        assert_eq!(pool.allocate(cid(0), &clock), Err(AddrError::PoolExhausted));
        assert_eq!(pool.occupancy(clock.now()), 256);
    }

    #[test]
    fn expired_leases_reused() {
        let split = AddressSplit::new(8).unwrap();
        let mut pool = AddressPool::new(1, split, 10).unwrap();
        let mut clock = SimClock::starting_at(0);
        let (a0, expiry) = pool.allocate(cid(1), &clock).unwrap();
        assert_eq!(expiry, Timestamp(10));
        clock.advance_to(Timestamp(5));
        let (a1, _) = pool.allocate(cid(2), &clock).unwrap();
        assert_ne!(a0, a1);
        // first lease expires at t=10; id 0 becomes free again
        clock.advance_to(Timestamp(10));
        let (a2, _) = pool.allocate(cid(3), &clock).unwrap();
        assert_eq!(a2, a0);
        assert_eq!(pool.occupancy(clock.now()), 2);
    }

    #[test]
    fn gap_filling() {
        let split = AddressSplit::new(8).unwrap();
        let mut pool = AddressPool::new(1, split, 5).unwrap();
        let mut clock = SimClock::starting_at(0);
        pool.allocate(cid(1), &clock).unwrap(); // id 0, expires t=5
        clock.advance_to(Timestamp(3));
        pool.allocate(cid(2), &clock).unwrap(); // id 1, expires t=8
        clock.advance_to(Timestamp(6));
        // id 0 expired, id 1 still live
        let (addr, _) = pool.allocate(cid(3), &clock).unwrap();
        assert_eq!(decompose_id(addr, split), 0);
        assert_eq!(pool.occupancy(clock.now()), 2);
        assert_eq!(pool.dump(clock.now()).len(), 2);
    }
}
