use std::collections::BTreeMap;

use crate::model::{CameraId, Thumbnail};

/// Per-camera, time-ordered thumbnail streams. A thumbnail is addressed by
/// its camera and its index within that camera's stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThumbnailStreams {
    streams: BTreeMap<CameraId, Vec<Thumbnail>>,
}

impl ThumbnailStreams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, camera: CameraId, stream: Vec<Thumbnail>) {
        self.streams.insert(camera, stream);
    }

    /// Appends to the camera's stream, creating it when absent.
    pub fn push(&mut self, thumb: Thumbnail) {
        self.streams.entry(thumb.camera_id.clone()).or_default().push(thumb);
    }

    pub fn stream(&self, camera: &str) -> &[Thumbnail] {
        self.streams.get(camera).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn stream_mut(&mut self, camera: &str) -> &mut [Thumbnail] {
        self.streams.get_mut(camera).map(Vec::as_mut_slice).unwrap_or(&mut [])
    }

    pub fn get(&self, camera: &str, index: usize) -> Option<&Thumbnail> {
        self.streams.get(camera).and_then(|s| s.get(index))
    }

    pub fn cameras(&self) -> impl Iterator<Item = &str> {
        self.streams.keys().map(String::as_str)
    }

    /// All thumbnails, camera by camera, each camera in stream order.
    pub fn iter(&self) -> impl Iterator<Item = &Thumbnail> {
        self.streams.values().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Thumbnail> {
        self.streams.values_mut().flatten()
    }

    pub fn len(&self) -> usize {
        self.streams.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Removes every `truth_player_id`.
    pub fn strip_truth(&mut self) {
        for t in self.iter_mut() {
            t.truth_player_id = None;
        }
    }

    pub fn has_full_truth(&self) -> bool {
        self.iter().all(|t| t.truth_player_id.is_some())
    }
}

impl FromIterator<Thumbnail> for ThumbnailStreams {
    fn from_iter<I: IntoIterator<Item = Thumbnail>>(iter: I) -> Self {
        let mut s = ThumbnailStreams::new();
        for t in iter {
            s.push(t);
        }
        s
    }
}
