from django.apps import AppConfig


class TreebankConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'treebank'
