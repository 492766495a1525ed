from django.apps import AppConfig


class HydroAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.hydro_app'
