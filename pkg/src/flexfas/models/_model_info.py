# canonical architecture name -> accepted aliases
TOY_CNN = {
    'toy_cnn': ['toy_cnn', 'toy-cnn', 'cnn'],
}

TOY_RESNET = {
    'toy_resnet': ['toy_resnet', 'toy-resnet', 'resnet'],
}

TOY_VIT = {
    'toy_vit': ['toy_vit', 'toy-vit', 'vit'],
}

# desk-scale optimiser defaults per family, mirroring the conv (Adam) vs transformer (AdamW) split
DEFAULT_OPTIMIZER = {
    'toy_cnn': ('adam', 1e-3),
    'toy_resnet': ('adam', 1e-3),
    'toy_vit': ('adamw', 1e-4),
}
