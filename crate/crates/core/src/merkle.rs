//! Binary Merkle tree over member leaves.
//!
//! Leaves are `H(leaf_tag || public_key)` sorted by public key. Odd layers are
//! padded by duplicating their last node. Interior nodes use a separate tag.

use serde::{Deserialize, Serialize};

use crate::hash::{tag, tagged, Digest, PublicKey};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MerkleError {
    #[error("member set is empty")]
    EmptyMemberSet,
    #[error("member listed twice")]
    DuplicateMember,
    #[error("member not in tree")]
    NotInTree,
}

pub fn member_leaf(pk: &PublicKey) -> Digest {
    tagged(tag::LEAF, &[pk.as_bytes()])
}

pub fn hash_node(left: &Digest, right: &Digest) -> Digest {
    tagged(tag::NODE, &[left.as_bytes(), right.as_bytes()])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipProof {
    /// Leaf position; bit `i` says whether the running node is the right child at level `i`.
    pub index: u64,
    pub siblings: Vec<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberTree {
    members: Vec<PublicKey>,
    /// `layers[0]` are the leaves, the last layer holds the root alone.
    layers: Vec<Vec<Digest>>,
}

impl MemberTree {
    pub fn build(members: &[PublicKey]) -> Result<Self, MerkleError> {
        if members.is_empty() {
            return Err(MerkleError::EmptyMemberSet);
        }
        let mut sorted = members.to_vec();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(MerkleError::DuplicateMember);
        }
        let mut layers = vec![sorted.iter().map(member_leaf).collect::<Vec<_>>()];
        while layers.last().map_or(false, |l| l.len() > 1) {
            let prev = layers.last().expect("non-empty");
            let next = prev
                .chunks(2)
                .map(|pair| hash_node(&pair[0], pair.get(1).unwrap_or(&pair[0])))
                .collect();
            layers.push(next);
        }
        Ok(Self { members: sorted, layers })
    }

    pub fn root(&self) -> Digest {
        self.layers.last().expect("at least one layer")[0]
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn leaves(&self) -> &[Digest] {
        &self.layers[0]
    }

    pub fn members(&self) -> &[PublicKey] {
        &self.members
    }

    pub fn contains(&self, pk: &PublicKey) -> bool {
        self.members.binary_search(pk).is_ok()
    }

    pub fn prove(&self, pk: &PublicKey) -> Result<MembershipProof, MerkleError> {
        let index = self.members.binary_search(pk).map_err(|_| MerkleError::NotInTree)?;
        let mut pos = index;
        let mut siblings = Vec::with_capacity(self.depth());
        for layer in &self.layers[..self.layers.len() - 1] {
            let sib = pos ^ 1;
            siblings.push(*layer.get(sib).unwrap_or(&layer[pos]));
            pos /= 2;
        }
        Ok(MembershipProof { index: index as u64, siblings })
    }
}

pub fn verify_membership(root: &Digest, leaf: &Digest, proof: &MembershipProof) -> bool {
    if proof.siblings.len() >= 64 || proof.index >> proof.siblings.len() != 0 {
        return false;
    }
    let mut node = *leaf;
    for (level, sib) in proof.siblings.iter().enumerate() {
        node = if (proof.index >> level) & 1 == 0 {
            hash_node(&node, sib)
        } else {
            hash_node(sib, &node)
        };
    }
    node == *root
}
