//! Long-form rating data: one `(item, rater, rating)` triple per row.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Immutable long-form binary rating data with a by-item index.
///
/// Items and raters are stored as contiguous zero-based indices; the
/// original identifiers are kept alongside so outputs can be joined back.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset {
    num_items: usize,
    num_raters: usize,
    items: Vec<u32>,
    raters: Vec<u32>,
    ratings: Vec<u8>,
    item_offsets: Vec<usize>,
    item_members: Vec<usize>,
    item_ids: Vec<String>,
    rater_ids: Vec<String>,
}

impl RatingDataset {
    /// Builds a dataset from rows of string identifiers.
    ///
    /// Identifiers are assigned indices in order of first appearance. A
    /// rater may rate the same item more than once.
    pub fn from_rows<I, S, T>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T, i64)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut item_lookup: BTreeMap<String, u32> = BTreeMap::new();
        let mut rater_lookup: BTreeMap<String, u32> = BTreeMap::new();
        let mut item_ids = Vec::new();
        let mut rater_ids = Vec::new();
        let mut items = Vec::new();
        let mut raters = Vec::new();
        let mut ratings = Vec::new();
        for (row, (item, rater, rating)) in rows.into_iter().enumerate() {
            if rating != 0 && rating != 1 {
                return Err(Error::InvalidRating { row, value: rating });
            }
            items.push(intern(&mut item_lookup, &mut item_ids, item.as_ref()));
            raters.push(intern(&mut rater_lookup, &mut rater_ids, rater.as_ref()));
            ratings.push(rating as u8);
        }
        if ratings.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self::assemble(items, raters, ratings, item_ids, rater_ids))
    }

    /// Builds a dataset over explicit index ranges `0..num_items` and
    /// `0..num_raters`. Unlike [`from_rows`](Self::from_rows) this accepts
    /// zero ratings and items or raters that are never observed; their
    /// parameters are then governed by the prior alone.
    pub fn from_indices(
        num_items: usize,
        num_raters: usize,
        triples: &[(usize, usize, u8)],
    ) -> Result<Self> {
        let mut items = Vec::with_capacity(triples.len());
        let mut raters = Vec::with_capacity(triples.len());
        let mut ratings = Vec::with_capacity(triples.len());
        for (row, &(i, j, y)) in triples.iter().enumerate() {
            if i >= num_items {
                return Err(Error::IndexOutOfRange { row, what: "item", index: i, size: num_items });
            }
            if j >= num_raters {
                return Err(Error::IndexOutOfRange { row, what: "rater", index: j, size: num_raters });
            }
            if y > 1 {
                return Err(Error::InvalidRating { row, value: y as i64 });
            }
            items.push(i as u32);
            raters.push(j as u32);
            ratings.push(y);
        }
        let item_ids = (1..=num_items).map(|i| i.to_string()).collect();
        let rater_ids = (1..=num_raters).map(|j| j.to_string()).collect();
        Ok(Self::assemble(items, raters, ratings, item_ids, rater_ids))
    }

    fn assemble(
        items: Vec<u32>,
        raters: Vec<u32>,
        ratings: Vec<u8>,
        item_ids: Vec<String>,
        rater_ids: Vec<String>,
    ) -> Self {
        let num_items = item_ids.len();
        let mut item_offsets = alloc::vec![0usize; num_items + 1];
        for &i in &items {
            item_offsets[i as usize + 1] += 1;
        }
        for i in 0..num_items {
            item_offsets[i + 1] += item_offsets[i];
        }
        let mut cursor = item_offsets.clone();
        let mut item_members = alloc::vec![0usize; items.len()];
        for (n, &i) in items.iter().enumerate() {
            item_members[cursor[i as usize]] = n;
            cursor[i as usize] += 1;
        }
        Self {
            num_items,
            num_raters: rater_ids.len(),
            items,
            raters,
            ratings,
            item_offsets,
            item_members,
            item_ids,
            rater_ids,
        }
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_raters(&self) -> usize {
        self.num_raters
    }

    /// Number of ratings.
    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    #[inline]
    pub fn item(&self, n: usize) -> usize {
        self.items[n] as usize
    }

    #[inline]
    pub fn rater(&self, n: usize) -> usize {
        self.raters[n] as usize
    }

    #[inline]
    pub fn rating(&self, n: usize) -> u8 {
        self.ratings[n]
    }

    pub fn ratings(&self) -> &[u8] {
        &self.ratings
    }

    /// Indices of the ratings of item `i`, in row order.
    #[inline]
    pub fn item_ratings(&self, i: usize) -> &[usize] {
        &self.item_members[self.item_offsets[i]..self.item_offsets[i + 1]]
    }

    pub fn max_ratings_per_item(&self) -> usize {
        (0..self.num_items).map(|i| self.item_ratings(i).len()).max().unwrap_or(0)
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn rater_ids(&self) -> &[String] {
        &self.rater_ids
    }

    /// Same skeleton (items, raters, ids) with a different rating vector.
    pub fn with_ratings(&self, ratings: Vec<u8>) -> Result<Self> {
        if ratings.len() != self.ratings.len() {
            return Err(Error::DimensionMismatch { expected: self.ratings.len(), found: ratings.len() });
        }
        if let Some(row) = ratings.iter().position(|&y| y > 1) {
            return Err(Error::InvalidRating { row, value: ratings[row] as i64 });
        }
        let mut out = self.clone();
        out.ratings = ratings;
        Ok(out)
    }

    /// The dataset with rating `n` removed; item and rater index spaces are
    /// unchanged.
    pub fn without_rating(&self, n: usize) -> Self {
        let keep = |v: &[u32]| {
            v.iter().enumerate().filter(|&(m, _)| m != n).map(|(_, &x)| x).collect::<Vec<_>>()
        };
        let ratings = self
            .ratings
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != n)
            .map(|(_, &y)| y)
            .collect();
        Self::assemble(
            keep(&self.items),
            keep(&self.raters),
            ratings,
            self.item_ids.clone(),
            self.rater_ids.clone(),
        )
    }

    /// Iterates `(item, rater, rating)` index triples in row order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, u8)> + '_ {
        (0..self.len()).map(move |n| (self.item(n), self.rater(n), self.rating(n)))
    }
}

fn intern(lookup: &mut BTreeMap<String, u32>, ids: &mut Vec<String>, key: &str) -> u32 {
    if let Some(&idx) = lookup.get(key) {
        return idx;
    }
    let idx = ids.len() as u32;
    lookup.insert(key.to_string(), idx);
    ids.push(key.to_string());
    idx
}
