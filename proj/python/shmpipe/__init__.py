"""Staged structural-inspection toolkit: dataset tooling, shallow damage
classifiers and a swappable segmentation pipeline over a C++ core."""

from ._shmpipe import (  # noqa: F401
    CodeTable,
    ComponentClass,
    ComponentInstance,
    DamageState,
    DefectClass,
    Error,
    FeatureVector,
    LabeledVector,
    Manifest,
    PixelRect,
    RotatedRect,
    Sampling,
    ShallowModel,
    __version__,
    apply_foreground_mask,
    audit_collisions,
    balance_by_undersampling,
    build_feature_vector,
    classification_scores,
    component_instances,
    connected_components,
    evaluate,
    feature_names,
    feature_vectors_from_manifest,
    fit_forest,
    fit_naive_bayes,
    fit_tree,
    foreground_from_components,
    generate_fixture,
    load_manifest,
    min_area_rect,
    probe_png_size,
    read_mask_png,
    read_png,
    save_manifest,
    segmentation_scores,
    split_dataset,
    split_test_count,
    warp_to_square,
    write_png,
)
