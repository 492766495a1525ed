from django.apps import AppConfig


class StageAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.stage_app'
