//! Numerical kernels shared by the regressors: dense decompositions, nearest
//! neighbour graphs with shortest paths, and RBF interpolation.

mod graph;
mod linalg;
mod rbf;

pub use graph::{geodesic_distances, knn_graph, knn_graph_from_distances, NeighborGraph};
pub use linalg::{pairwise_distances, svd, sym_eig, SymEig, Svd};
pub use rbf::{rbf_fit, rbf_predict, select_shape_loocv, Kernel, RbfModel, ShapeSelection};
