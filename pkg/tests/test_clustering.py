import numpy as np
import pytest

from constants import Band
from errors import ClusteringError
from spatial.clustering import (
    ClusterModel,
    bounding_volume_ratio,
    cluster_volume_ratio,
    davies_bouldin,
    db_index,
    kmeans,
)
from spatial.floorplan import Floorplan, load_sites
from spatial.propagation import load_path_loss, signatures


def _blobs(seed: int, size: int = 50) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.vstack([rng.normal(loc=(0.0, 0.0), scale=0.5, size=(size, 2)), rng.normal(loc=(20.0, 20.0), scale=0.5, size=(size, 2))])


def test_two_separated_blobs_are_recovered(seed) -> None:
    """Test that k=2 on two far-apart blobs assigns by blob membership."""
    data = _blobs(seed)
    model = kmeans(data, 2, seed=seed)
    assert model.converged
    first, second = model.labels[:50], model.labels[50:]
    assert np.unique(first).size == 1
    assert np.unique(second).size == 1
    assert first[0] != second[0]


def test_singleton_clusters_have_zero_db_index() -> None:
    """Test that k equal to the number of distinct points gives DB = 0."""
    data = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]])
    model = kmeans(data, 4, seed=3)
    assert db_index(model, data) == 0.0


def test_db_index_hand_computed() -> None:
    """Test (1 + 1) / 4 for two clusters of spread 1 with centroids 4 apart."""
    data = np.array([[-1.0, 0.0], [1.0, 0.0], [3.0, 0.0], [5.0, 0.0]])
    labels = np.array([0, 0, 1, 1])
    centroids = np.array([[0.0, 0.0], [4.0, 0.0]])
    assert davies_bouldin(data, labels, centroids) == pytest.approx(0.5)
    assert davies_bouldin(data[[0, 2]], np.array([0, 1]), data[[0, 2]]) == 0.0


def test_coincident_centroids_give_infinite_db() -> None:
    """Test that two clusters sharing a centroid report an infinite index."""
    data = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
    labels = np.array([0, 0, 1, 1])
    assert davies_bouldin(data, labels, np.zeros((2, 2))) == np.inf


def test_volume_ratio_single_cluster_and_corner_blobs() -> None:
    """Test ratio 1 for one cluster and 0.25 for two disjoint eighth-volume boxes of the unit cube."""
    corners = np.array([[x, y, z] for x in (0.0, 0.5) for y in (0.0, 0.5) for z in (0.0, 0.5)])
    data = np.vstack([corners, corners + 0.5])
    assert bounding_volume_ratio(data, np.zeros(len(data), dtype=int)) == pytest.approx(1.0)
    labels = np.repeat([0, 1], len(corners))
    assert bounding_volume_ratio(data, labels) == pytest.approx(0.25)


def test_volume_ratio_ignores_flat_dimensions() -> None:
    """Test that a dimension with no global spread drops out of the products."""
    data = np.array([[0.0, 1.0], [0.5, 1.0], [0.5, 1.0], [1.0, 1.0]])
    assert bounding_volume_ratio(data, np.array([0, 0, 1, 1])) == pytest.approx(1.0)


def test_empty_cluster_is_reseeded_at_the_farthest_point(seed) -> None:
    """Test that a centroid nobody joins is moved onto a data point."""
    data = _blobs(seed, size=20)
    init = np.array([[0.0, 0.0], [20.0, 20.0], [1000.0, 1000.0]])
    model = kmeans(data, 3, seed=seed, init=init)
    assert set(np.unique(model.labels)) == {0, 1, 2}
    assert np.all(np.abs(model.centroids) < 100.0)


def test_kmeans_input_errors() -> None:
    """Test the k, size and finiteness checks."""
    data = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(ClusteringError):
        kmeans(data, 1)
    with pytest.raises(ClusteringError):
        kmeans(data, 4)
    with pytest.raises(ClusteringError):
        kmeans(np.array([[0.0, np.inf], [1.0, 1.0]]), 2)
    with pytest.raises(ClusteringError):
        ClusterModel(k=2, centroids=np.zeros((3, 2)), labels=np.zeros(3, dtype=int))


def test_histories_track_every_iteration(seed) -> None:
    """Test that the per-iteration diagnostics have one entry per Lloyd step."""
    model = kmeans(_blobs(seed), 2, seed=seed)
    assert len(model.db_history) == model.iterations
    assert len(model.volume_ratio_history) == model.iterations
    assert len(model.inertia_history) == model.iterations
    assert cluster_volume_ratio(model, _blobs(seed)) == pytest.approx(model.volume_ratio_history[-1])


@pytest.mark.slow
def test_household_furniture_placement_clusters_tighter(tc1_config, seed) -> None:
    """Test that stations gathered on furniture give a lower DB index than uniform stations."""
    plan = Floorplan.from_dict(tc1_config["floorplan"])
    sites = load_sites(tc1_config["aps"], plan)
    model = load_path_loss()
    settings = tc1_config["pipeline"]["spatial"]
    uniform = signatures(sites, list(Band), plan.uniform_points(400, seed=seed), plan, model)
    furniture = signatures(
        sites, list(Band), plan.furniture_points(400, seed=seed, spread=settings["furniture_spread_m"]), plan, model
    )
    uniform_model = kmeans(uniform, 4, seed=seed)
    furniture_model = kmeans(furniture, 4, seed=seed)
    assert uniform.dimension == 12
    assert uniform_model.converged and furniture_model.converged
    assert db_index(furniture_model, furniture) < db_index(uniform_model, uniform)
