//! Closed sets of graph and feature representations.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphKind {
    Grid,
    Row,
    Column,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Pixel,
    Standard,
    Correlation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownKind(pub String);

impl fmt::Display for UnknownKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown kind '{}'", self.0)
    }
}

impl std::error::Error for UnknownKind {}

macro_rules! tagged_enum {
    ($ty:ident { $($variant:ident => ($name:literal, $tag:literal)),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }

            /// Byte used in the on-disk header.
            pub fn tag(self) -> u8 {
                match self { $($ty::$variant => $tag),+ }
            }

            pub fn from_tag(tag: u8) -> Option<Self> {
                match tag { $($tag => Some($ty::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = UnknownKind;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s { $($name => Ok($ty::$variant),)+ _ => Err(UnknownKind(s.to_owned())) }
            }
        }
    };
}

tagged_enum!(GraphKind {
    Grid => ("grid", 0),
    Row => ("row", 1),
    Column => ("column", 2),
    Product => ("product", 3),
});

tagged_enum!(FeatureKind {
    Pixel => ("pixel", 0),
    Standard => ("standard", 1),
    Correlation => ("correlation", 2),
});

impl GraphKind {
    /// Nodes in a graph of this kind for an `n x n` image.
    pub fn node_count(self, n: usize) -> usize {
        match self {
            GraphKind::Row | GraphKind::Column => n,
            GraphKind::Grid | GraphKind::Product => n * n,
        }
    }

    /// Whether nodes are individual pixels.
    pub fn is_pixel_graph(self) -> bool {
        matches!(self, GraphKind::Grid | GraphKind::Product)
    }
}

impl FeatureKind {
    pub fn feature_dim(self, graph: GraphKind, n: usize) -> usize {
        match (self, graph) {
            (FeatureKind::Pixel, GraphKind::Row | GraphKind::Column) => n,
            (FeatureKind::Pixel, _) => 1,
            (FeatureKind::Standard, _) => 4,
            (FeatureKind::Correlation, _) => n * n,
        }
    }
}

/// Row and column graphs carry the `N`-long pixel rows/columns; standard
/// features need one node per pixel; correlation features only pair with the
/// product graph.
pub fn is_valid_combination(graph: GraphKind, features: FeatureKind) -> bool {
    match features {
        FeatureKind::Pixel => true,
        FeatureKind::Standard => graph.is_pixel_graph(),
        FeatureKind::Correlation => graph == GraphKind::Product,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_tags_round_trip() {
        for &g in GraphKind::ALL {
            assert_eq!(g.name().parse::<GraphKind>().unwrap(), g);
            assert_eq!(GraphKind::from_tag(g.tag()), Some(g));
        }
        for &f in FeatureKind::ALL {
            assert_eq!(f.name().parse::<FeatureKind>().unwrap(), f);
            assert_eq!(FeatureKind::from_tag(f.tag()), Some(f));
        }
        assert!("hexagon".parse::<GraphKind>().is_err());
        assert_eq!(GraphKind::from_tag(9), None);
    }

    #[test]
    fn valid_cells() {
        let valid: Vec<_> = GraphKind::ALL
            .iter()
            .flat_map(|&g| FeatureKind::ALL.iter().map(move |&f| (g, f)))
            .filter(|&(g, f)| is_valid_combination(g, f))
            .collect();
        use FeatureKind::*;
        use GraphKind::*;
        assert_eq!(
            valid,
            vec![
                (Grid, Pixel),
                (Grid, Standard),
                (Row, Pixel),
                (Column, Pixel),
                (Product, Pixel),
                (Product, Standard),
                (Product, Correlation)
            ]
        );
        assert_eq!(Correlation.feature_dim(Product, 28), 784);
        assert_eq!(Pixel.feature_dim(Row, 28), 28);
        assert_eq!(Pixel.feature_dim(Grid, 28), 1);
    }
}
