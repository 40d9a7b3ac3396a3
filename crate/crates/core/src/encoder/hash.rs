use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Encoder, EncoderError, EncoderSpec, Encoding, TokenizedPost, MAX_SEQUENCE_LENGTH};

/// Id reserved for the sentence-start position.
pub const CLS_ID: u32 = 0;
const VOCAB_SIZE: u64 = 1 << 20;
/// Characters per subword piece.
const PIECE_CHARS: usize = 3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic encoder for tests: words are cut into 3-character pieces
/// (continuations marked `##`), each piece hashed to an id, and each id
/// mapped to a seeded random point on the unit sphere. The pooled vector
/// (and row 0 of the sequence) is the L2-normalized mean of the subword
/// vectors.
#[derive(Clone, Debug)]
pub struct HashEncoder {
    spec: EncoderSpec,
}

impl HashEncoder {
    pub fn new(spec: EncoderSpec) -> HashEncoder {
        HashEncoder { spec }
    }

    fn piece_id(piece: &str) -> u32 {
        (1 + fnv1a(piece.as_bytes()) % (VOCAB_SIZE - 1)) as u32
    }

    /// Unit-norm vector for one subword id.
    pub fn subword_vector(&self, id: u32) -> Array1<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(self.spec.seed ^ splitmix(u64::from(id))));
        let v: Vec<f64> = (0..self.spec.d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Array1::from_iter(v.iter().map(|x| (x / norm) as f32))
    }
}

impl Encoder for HashEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedPost, EncoderError> {
        let mut ids = vec![CLS_ID];
        'words: for word in text.split_whitespace() {
            let chars: Vec<char> = word.chars().collect();
            for (i, chunk) in chars.chunks(PIECE_CHARS).enumerate() {
                if ids.len() == MAX_SEQUENCE_LENGTH {
                    break 'words;
                }
                let mut piece: String = if i == 0 { String::new() } else { "##".into() };
                piece.extend(chunk);
                ids.push(Self::piece_id(&piece));
            }
        }
        if ids.len() == 1 {
            return Err(EncoderError::EmptyInput);
        }
        let mask = vec![1; ids.len()];
        Ok(TokenizedPost { ids, mask })
    }

    fn encode(&self, batch: &[TokenizedPost]) -> Result<Vec<Encoding>, EncoderError> {
        let d = self.spec.d;
        batch
            .iter()
            .map(|post| {
                let active: Vec<u32> = post
                    .ids
                    .iter()
                    .zip(&post.mask)
                    .filter(|(_, &m)| m == 1)
                    .map(|(&id, _)| id)
                    .collect();
                let mut sequence = Array2::<f32>::zeros((active.len(), d));
                let mut pooled = Array1::<f32>::zeros(d);
                let mut count = 0usize;
                for (row, &id) in active.iter().enumerate() {
                    if id == CLS_ID {
                        continue;
                    }
                    let v = self.subword_vector(id);
                    pooled += &v;
                    count += 1;
                    sequence.row_mut(row).assign(&v);
                }
                let norm = pooled.dot(&pooled).sqrt();
                if count > 0 && norm > 0.0 {
                    pooled /= norm;
                }
                for (row, &id) in active.iter().enumerate() {
                    if id == CLS_ID {
                        sequence.row_mut(row).assign(&pooled);
                    }
                }
                Ok(Encoding { pooled, sequence })
            })
            .collect()
    }
}
